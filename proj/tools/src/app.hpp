#pragma once

namespace mitodet::app {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kInputError = 3,
  kBackendError = 4,
};

/// Entry point of the `mitodet` command. Returns the process exit code.
/// Outputs are staged and only moved into place once a command succeeds.
int main(int argc, const char* const* argv);

}  // namespace mitodet::app
