#pragma once

#include <string>
#include <vector>

#include "kglm/eval.hpp"
#include "kglm/train.hpp"

namespace kglm {

// Metric JSON (no timestamps, byte-stable for identical runs) and the
// per-triple rank CSV dump.
void write_eval_report_json(const std::string& path, const EvalReport& report);
EvalReport load_eval_report_json(const std::string& path);
void write_rank_csv(const std::string& path, const EvalReport& report);

// Aligned markdown comparison across runs; the best value per metric column
// is bolded (max for hits/MRR, min for MR).
std::string comparison_markdown(const std::vector<EvalReport>& reports);

// JSON-lines training log record.
std::string train_log_line(const TrainLog& entry, const std::string& phase);

// Static plot emission.
void write_loss_curve_svg(const std::string& path, const std::vector<TrainLog>& log,
                          const std::string& phase);
void write_loss_curve_csv(const std::string& path, const std::vector<TrainLog>& log,
                          const std::string& phase);
void write_rank_histogram_svg(const std::string& path, const std::vector<double>& ranks);

}  // namespace kglm
