#include "sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "common.hpp"

namespace pv {

namespace {

std::string find_python() {
    const char * path = std::getenv("PATH");
    if (path == nullptr) {
        path = "/usr/local/bin:/usr/bin:/bin";
    }
    for (const std::string & dir : split(path, ':')) {
        if (dir.empty()) {
            continue;
        }
        std::string candidate = dir + "/python3";
        if (access(candidate.c_str(), X_OK) == 0) {
            return candidate;
        }
    }
    throw infra_error("sandbox: python3 not found on PATH");
}

struct one_run {
    bool finished = false;  // exited before the wall clock deadline
    int exit_code = -1;
    std::string output;
};

one_run run_once(const std::string & interpreter, const std::string & source_path,
                 const std::string & input, const sandbox_limits & limits) {
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
        throw infra_error("sandbox: pipe() failed");
    }

    pid_t pid = fork();
    if (pid < 0) {
        throw infra_error("sandbox: fork() failed");
    }
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(out_pipe[1], STDERR_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);

        rlimit cpu{};
        cpu.rlim_cur = cpu.rlim_max = (rlim_t) std::ceil(limits.time_s) + 1;
        setrlimit(RLIMIT_CPU, &cpu);
        rlimit mem{};
        mem.rlim_cur = mem.rlim_max = (rlim_t) limits.memory_mb * 1024 * 1024;
        setrlimit(RLIMIT_AS, &mem);

        execl(interpreter.c_str(), interpreter.c_str(), "-I", source_path.c_str(), (char *) nullptr);
        _exit(127);
    }

    close(in_pipe[0]);
    close(out_pipe[1]);

    // feed stdin fully, then close so the child sees EOF
    size_t written = 0;
    while (written < input.size()) {
        ssize_t n = write(in_pipe[1], input.data() + written, input.size() - written);
        if (n <= 0) {
            break;  // child closed stdin early; its output decides the verdict
        }
        written += (size_t) n;
    }
    close(in_pipe[1]);

    one_run result;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds((long) (limits.time_s * 1000.0) + 200);
    char buf[4096];
    bool open = true;
    while (open) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            kill(pid, SIGKILL);
            break;
        }
        pollfd pfd{out_pipe[0], POLLIN, 0};
        int rv = poll(&pfd, 1, (int) remaining.count());
        if (rv < 0) {
            if (errno == EINTR) {
                continue;
            }
            kill(pid, SIGKILL);
            break;
        }
        if (rv == 0) {
            kill(pid, SIGKILL);
            break;
        }
        ssize_t n = read(out_pipe[0], buf, sizeof(buf));
        if (n > 0) {
            result.output.append(buf, (size_t) n);
            if (result.output.size() > (1u << 22)) {
                // runaway printer: cap the transcript and stop it
                kill(pid, SIGKILL);
                break;
            }
        } else {
            open = false;  // EOF or error: child closed its end
        }
    }
    close(out_pipe[0]);

    int status = 0;
    if (waitpid(pid, &status, 0) == pid && WIFEXITED(status)) {
        result.finished = true;
        result.exit_code = WEXITSTATUS(status);
    }
    return result;
}

}  // namespace

sandbox_outcome run_python_tests(const std::string & source, const std::vector<code_test> & suite,
                                 const sandbox_limits & limits) {
    if (suite.empty()) {
        throw validation_error("sandbox: empty test suite");
    }
    std::string interpreter = find_python();

    char tmpl[] = "/tmp/pv_candidate_XXXXXX";
    int fd = mkstemp(tmpl);
    if (fd < 0) {
        throw infra_error("sandbox: mkstemp failed");
    }
    std::string source_path = tmpl;
    ssize_t n = write(fd, source.data(), source.size());
    close(fd);
    if (n != (ssize_t) source.size()) {
        unlink(source_path.c_str());
        throw infra_error("sandbox: writing candidate source failed");
    }

    sandbox_outcome outcome;
    outcome.passed = true;
    for (size_t i = 0; i < suite.size(); i++) {
        one_run r = run_once(interpreter, source_path, suite[i].input, limits);
        if (!r.finished) {
            outcome.passed = false;
            outcome.detail = "test " + std::to_string(i + 1) + ": timed out";
            break;
        }
        if (r.exit_code == 127) {
            unlink(source_path.c_str());
            throw infra_error("sandbox: interpreter failed to start");
        }
        if (r.exit_code != 0) {
            outcome.passed = false;
            outcome.detail = "test " + std::to_string(i + 1) + ": exit code " +
                             std::to_string(r.exit_code);
            break;
        }
        if (trim(r.output) != trim(suite[i].expected)) {
            outcome.passed = false;
            outcome.detail = "test " + std::to_string(i + 1) + ": output mismatch (got '" +
                             first_n_words(trim(r.output), 12) + "')";
            break;
        }
    }
    unlink(source_path.c_str());
    return outcome;
}

}  // namespace pv
