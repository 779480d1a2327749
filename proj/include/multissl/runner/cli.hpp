#pragma once

namespace multissl::runner {

/// Exit codes: 0 success, 1 runtime failure, 2 configuration error.
int run_cli(int argc, char** argv);

}  // namespace multissl::runner
