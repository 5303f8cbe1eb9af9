#pragma once

namespace htbench {

/// Entry point of the `htbench` executable. Exit codes: 0 ok, 1 runtime
/// failure, 2 usage error.
int cli_dispatch(int argc, char** argv);

}  // namespace htbench
