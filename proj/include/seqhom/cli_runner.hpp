#pragma once

namespace seqhom {

/// Entry point of the `seqhom` command line tool:
///   seqhom run <experiment> [--config file.json] [--set key=value ...] [--out dir]
///   seqhom list
///   seqhom check
int cli_main(int argc, char** argv);

}  // namespace seqhom
