#pragma once

namespace ugtsr {

// Single entry point behind the `ugtsr` binary. Subcommands: make-data,
// pretrain-codebook, train-stage1, train-stage2, infer, evaluate, hit-rate,
// bench-matching, plot, ablate.
//
// Exit codes: 0 success, 1 runtime failure (one-line diagnostic on stderr),
// 2 usage error (unknown subcommand/flag; usage text on stderr). Every run
// snapshots its effective config into the output directory before work
// starts, and existing primary outputs are only replaced under --overwrite.
int cli_main(int argc, const char* const* argv);

}  // namespace ugtsr
