#pragma once
#include <iosfwd>
#include <string>
#include <vector>

#include "stresscast/forecaster.hpp"
#include "stresscast/pipeline.hpp"

namespace stresscast::rp {

// The run summary as versioned JSON text. Every byte is determined by the
// config and seed except the generated_at metadata field.
std::string summary_json(const pl::RunConfig& cfg, const pl::RunOutcome& outcome);

// Writes summary.json plus the CSV/JSON artifacts (checkpoint, training log,
// forecasts, ledgers, KDE curves, stress reports and logs) under cfg.out_dir.
// Returns the relative paths written; on failure removes what it wrote.
std::vector<std::string> emit_artifacts(const pl::RunConfig& cfg,
                                        const pl::RunOutcome& outcome);

void write_training_log_csv(const fc::TrainLog& log, std::ostream& out);
void write_forecasts_csv(const pl::ForecastSet& fs, std::ostream& out);

// Human-readable digest of an emitted summary.json.
std::string render_text_report(const std::string& summary_json_text);

}  // namespace stresscast::rp
