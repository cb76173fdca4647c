#pragma once

namespace offpol {

/// Entry point of the `offpol` command-line tool. Returns the process exit
/// code: 0 on success, 1 on a library error, 2 on a usage error. Errors are
/// written to stderr as a single JSON object with "error" and "message" keys.
int cli_main(int argc, char** argv);

}  // namespace offpol
