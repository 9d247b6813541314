#pragma once

#include <string>

#include "sncpd/runconfig.hpp"

namespace sncpd {

// Each command writes its artifacts under <out_root>/<command>/ together with
// a MANIFEST.txt recording the config hash, the seed and every file written.
// All of them print a short summary and return 0; failures are thrown.

// Fits an encoder on the train split and saves checkpoint.bin plus the loss
// traces.
int cmd_train(const RunConfig& cfg);

// Scores the test split and writes trace.csv; the alarm threshold is swept on
// the validation split when it carries labels.
int cmd_detect(const RunConfig& cfg);

// Reads a detection trace and reports margin precision/recall/F1 against the
// test-split change points. Empty trace_path falls back to the detect output.
int cmd_evaluate(const RunConfig& cfg, const std::string& trace_path);

// Audits the model: norm-cap/distance-band certification with the kernel
// envelope, block-stack inversion, likelihood-ratio preservation and
// two-sample test power. Reports record PASS/FAIL; the command itself
// succeeds either way.
int cmd_verify(const RunConfig& cfg);

// kind = dynamics: embedding similarity around spliced change points.
// kind = rejection: divergence-ranked sample rejection vs detection F1.
int cmd_experiment(const RunConfig& cfg, const std::string& kind);

}  // namespace sncpd
