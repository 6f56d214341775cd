#pragma once

namespace curvreg_cli {

/// Entry point of the `curvreg` command-line tool (separated from main() so
/// tests can drive it in-process). Returns the process exit code.
int cli_main(int argc, const char* const* argv);

}  // namespace curvreg_cli
