// Sandboxed execution of candidate python programs against stdin/stdout
// test cases. Each test runs in a fresh subprocess under CPU-time and
// address-space ceilings plus a wall-clock kill switch, so a hostile or
// looping candidate cannot wedge the oracle.

#pragma once

#include <string>
#include <vector>

namespace pv {

struct code_test {
    std::string input;
    std::string expected;  // compared against trimmed stdout
};

struct sandbox_limits {
    double time_s = 5.0;
    int memory_mb = 768;
};

struct sandbox_outcome {
    bool passed = false;
    std::string detail;  // first failure description, empty when passed
};

// Runs every test; stops at the first failure. Timeouts and crashes are
// failures. A missing interpreter is an infra_error, which callers must
// keep distinct from a wrong candidate.
sandbox_outcome run_python_tests(const std::string & source, const std::vector<code_test> & suite,
                                 const sandbox_limits & limits);

}  // namespace pv
