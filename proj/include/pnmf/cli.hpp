#pragma once

namespace pnmf {

// Entry point for the command line tool; returns the process exit code
// (0 success, 1 validation or runtime failure, 2 usage error).
int cli_main(int argc, char** argv);

}  // namespace pnmf
