#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ser/harness.h"

namespace ser {

/// One row per record, in the given order: AvRec in percent and AvAUC, each
/// as median +/- IQR over seeds.
std::string report_table(const std::vector<RunRecord>& records);

/// Per-system min/Q1/median/Q3/max of both metrics plus the raw per-seed
/// values.
std::string box_plot_json(const std::vector<RunRecord>& records);

/// AvAUC box plot, one box per system.
std::string box_plot_svg(const std::vector<RunRecord>& records);

/// Writes report.txt, boxplot.json and boxplot.svg into `out_dir`.
void write_report(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir);

}  // namespace ser
