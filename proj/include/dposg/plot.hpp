#pragma once

#include "dposg/common.hpp"
#include "dposg/engine.hpp"
#include "dposg/metrics.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dposg {

/// Parses a run CSV. Throws InvalidArgument on a header other than the record
/// schema or when there are no data rows.
inline std::vector<RunRecord> read_records_csv(std::istream& in, const std::string& origin = "csv") {
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw InvalidArgument(origin + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordCsvHeader) throw InvalidArgument(origin + ": schema mismatch, expected header '" +
                                                      std::string(kRecordCsvHeader) + "'");
  std::vector<RunRecord> records;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw InvalidArgument(origin + ": schema mismatch on row " + std::to_string(row));
    try {
      RunRecord r;
      r.iter = std::stoll(cells[0]);
      r.grad_norm_sq_at_avg = std::stod(cells[1]);
      r.lambda_consensus = std::stod(cells[2]);
      r.mu_disagreement = std::stod(cells[3]);
      r.avg_param_norm = std::stod(cells[4]);
      r.oracle_calls = std::stoll(cells[5]);
      r.mix_rounds = std::stoll(cells[6]);
      records.push_back(r);
    } catch (const std::logic_error&) {
      throw InvalidArgument(origin + ": unparsable value on row " + std::to_string(row));
    }
  }
  if (records.empty()) throw InvalidArgument(origin + ": empty CSV");
  return records;
}

namespace detail {

inline constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Renders gradient norm and consensus error curves from plot_data.json."""
import json
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
data = json.loads((here / "plot_data.json").read_text())

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for panel, ax in zip(data["panels"], axes):
    for series in data["series"]:
        xs = series["iter"]
        ys = series[panel["metric"]]
        pts = [(x, y) for x, y in zip(xs, ys) if y > 0]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], label=series["label"])
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(panel["ylabel"])
    ax.legend()
fig.tight_layout()
out = here / (sys.argv[1] if len(sys.argv) > 1 else "convergence.png")
fig.savefig(out, dpi=120)
print(out)
)PY";

inline std::vector<std::string> series_labels(const std::vector<std::filesystem::path>& paths) {
  std::map<std::string, int> stem_count;
  for (const auto& p : paths) ++stem_count[p.stem().string()];
  std::vector<std::string> labels;
  for (const auto& p : paths) {
    std::string label = p.stem().string();
    if (stem_count[label] > 1 && p.has_parent_path()) label = p.parent_path().filename().string() + "/" + label;
    labels.push_back(label);
  }
  return labels;
}

}  // namespace detail

/// Data bundle for the convergence plot: one series per CSV, two log-scale
/// panels (||g(z_bar)||^2 and lambda vs iteration).
inline nlohmann::json plot_bundle(const std::vector<std::filesystem::path>& csv_paths) {
  require(!csv_paths.empty(), "plot needs at least one CSV");
  const auto labels = detail::series_labels(csv_paths);
  nlohmann::json bundle;
  bundle["panels"] = nlohmann::json::array(
      {{{"metric", "grad_norm_sq_at_avg"}, {"ylabel", "||g(z_bar)||^2"}},
       {{"metric", "lambda_consensus"}, {"ylabel", "consensus error lambda"}}});
  bundle["series"] = nlohmann::json::array();
  for (std::size_t i = 0; i < csv_paths.size(); ++i) {
    std::ifstream in(csv_paths[i]);
    if (!in) throw InvalidArgument("cannot open '" + csv_paths[i].string() + "'");
    const auto records = read_records_csv(in, csv_paths[i].string());
    nlohmann::json series;
    series["label"] = labels[i];
    series["source"] = csv_paths[i].string();
    for (const auto& r : records) {
      series["iter"].push_back(r.iter);
      series["grad_norm_sq_at_avg"].push_back(r.grad_norm_sq_at_avg);
      series["lambda_consensus"].push_back(r.lambda_consensus);
    }
    bundle["series"].push_back(std::move(series));
  }
  return bundle;
}

/// Writes plot_data.json and plot_convergence.py under `out_dir`.
inline void write_plot_bundle(const std::vector<std::filesystem::path>& csv_paths,
                              const std::filesystem::path& out_dir) {
  const nlohmann::json bundle = plot_bundle(csv_paths);
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "plot_data.json", bundle.dump(1) + "\n");
  write_text_file(out_dir / "plot_convergence.py", detail::kPlotScript);
}

}  // namespace dposg
