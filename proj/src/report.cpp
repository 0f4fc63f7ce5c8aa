#include "kglm/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace kglm {

namespace {
constexpr int kReportVersion = 1;
}

void write_eval_report_json(const std::string& path, const EvalReport& report) {
    json metrics = {{"mr", report.mr}, {"mrr", report.mrr}};
    for (const auto& [n, frac] : report.hits) metrics["hits@" + std::to_string(n)] = frac;
    json j = {{"format", "kglm-eval-report"},
              {"version", kReportVersion},
              {"label", report.label},
              {"dataset", report.dataset},
              {"model_kind", report.model_kind},
              {"alpha", report.alpha},
              {"seed", report.seed},
              {"tie_policy", report.tie_policy},
              {"sampling", report.sampling},
              {"num_ranks", report.ranks.size()},
              {"metrics", metrics}};
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

EvalReport load_eval_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open report: " + path);
    json j = json::parse(in, nullptr, true, true);
    if (j.value("format", "") != "kglm-eval-report")
        throw ArtifactError("not an eval report: " + path);
    EvalReport r;
    r.label = j.value("label", "");
    r.dataset = j.value("dataset", "");
    r.model_kind = j.value("model_kind", "");
    r.alpha = j.value("alpha", 0.5);
    r.seed = j.value("seed", 0ull);
    r.tie_policy = j.value("tie_policy", "mean");
    r.sampling = j.value("sampling", "full");
    const json& m = j.at("metrics");
    r.mr = m.at("mr");
    r.mrr = m.at("mrr");
    for (const auto& [key, value] : m.items())
        if (key.rfind("hits@", 0) == 0)
            r.hits.emplace_back(std::stoi(key.substr(5)), value.get<double>());
    std::sort(r.hits.begin(), r.hits.end());
    r.ranks.assign(size_t(j.value("num_ranks", 0)), 0.0);  // counts only; see the CSV dump
    return r;
}

void write_rank_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write rank dump: " + path);
    out << "# kglm-rank-dump v" << kReportVersion << "\n";
    out << "index,rank\n";
    for (size_t i = 0; i < report.ranks.size(); ++i) {
        std::ostringstream v;
        v << report.ranks[i];
        out << i << "," << v.str() << "\n";
    }
}

namespace {

std::string fmt_metric(double v, bool integer_like) {
    std::ostringstream out;
    if (integer_like) out << std::fixed << std::setprecision(2) << v;
    else out << std::fixed << std::setprecision(3) << v;
    return out.str();
}

}  // namespace

std::string comparison_markdown(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw ConfigError("no reports to compare");

    struct Col {
        std::string name;
        bool lower_better;
        std::function<double(const EvalReport&)> get;
    };
    std::vector<Col> cols = {
        {"hits@1", false, [](const EvalReport& r) { return r.hits_at(1); }},
        {"hits@3", false, [](const EvalReport& r) { return r.hits_at(3); }},
        {"hits@10", false, [](const EvalReport& r) { return r.hits_at(10); }},
        {"MR", true, [](const EvalReport& r) { return r.mr; }},
        {"MRR", false, [](const EvalReport& r) { return r.mrr; }},
    };

    std::vector<size_t> best(cols.size(), 0);
    for (size_t c = 0; c < cols.size(); ++c)
        for (size_t i = 1; i < reports.size(); ++i) {
            double v = cols[c].get(reports[i]), b = cols[c].get(reports[best[c]]);
            if (cols[c].lower_better ? v < b : v > b) best[c] = i;
        }

    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header = {"run"};
    for (const auto& c : cols) header.push_back(c.name);
    cells.push_back(header);
    for (size_t i = 0; i < reports.size(); ++i) {
        std::vector<std::string> row = {reports[i].label.empty() ? ("run" + std::to_string(i))
                                                                 : reports[i].label};
        for (size_t c = 0; c < cols.size(); ++c) {
            std::string v = fmt_metric(cols[c].get(reports[i]), cols[c].lower_better);
            if (best[c] == i && reports.size() > 1) v = "**" + v + "**";
            row.push_back(v);
        }
        cells.push_back(row);
    }

    std::vector<size_t> width(header.size(), 0);
    for (const auto& row : cells)
        for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

    std::ostringstream out;
    auto emit_row = [&](const std::vector<std::string>& row) {
        out << "|";
        for (size_t c = 0; c < row.size(); ++c)
            out << " " << row[c] << std::string(width[c] - row[c].size(), ' ') << " |";
        out << "\n";
    };
    emit_row(cells[0]);
    out << "|";
    for (size_t c = 0; c < header.size(); ++c) out << std::string(width[c] + 2, '-') << "|";
    out << "\n";
    for (size_t i = 1; i < cells.size(); ++i) emit_row(cells[i]);
    return out.str();
}

std::string train_log_line(const TrainLog& entry, const std::string& phase) {
    json j = {{"phase", phase},
              {"epoch", entry.epoch},
              {"loss", entry.train_loss},
              {"wall_time_s", entry.wall_seconds}};
    if (phase == "pretrain") j["holdout_loss"] = entry.holdout_loss;
    else j["val_mrr"] = entry.val_mrr;
    return j.dump();
}

// ---------------------------------------------------------------------------
// minimal static SVG plots
// ---------------------------------------------------------------------------

namespace {

constexpr int kW = 640, kH = 400, kPad = 50;

std::string svg_header() {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out.str();
}

void svg_axes(std::ostringstream& out, const std::string& xlabel, const std::string& ylabel) {
    out << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad / 2
        << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kPad << "\" y2=\""
        << kPad / 2 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10
        << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n"
        << "<text x=\"14\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 14 " << kH / 2
        << ")\" text-anchor=\"middle\" font-size=\"13\">" << ylabel << "</text>\n";
}

}  // namespace

void write_loss_curve_svg(const std::string& path, const std::vector<TrainLog>& log,
                          const std::string& phase) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write plot: " + path);
    std::ostringstream out;
    out << svg_header();
    svg_axes(out, "epoch", phase == "pretrain" ? "mlm loss" : "bce loss");
    if (!log.empty()) {
        double xmin = log.front().epoch, xmax = std::max<double>(log.back().epoch, xmin + 1);
        double ymin = 1e300, ymax = -1e300;
        for (const auto& e : log) {
            ymin = std::min({ymin, e.train_loss, e.holdout_loss});
            ymax = std::max({ymax, e.train_loss, e.holdout_loss});
        }
        if (ymax <= ymin) ymax = ymin + 1.0;
        auto sx = [&](double x) { return kPad + (x - xmin) / (xmax - xmin) * (kW - 1.5 * kPad); };
        auto sy = [&](double y) {
            return kH - kPad - (y - ymin) / (ymax - ymin) * (kH - 1.5 * kPad);
        };
        auto polyline = [&](auto get, const char* color) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
            for (const auto& e : log) out << sx(e.epoch) << "," << sy(get(e)) << " ";
            out << "\"/>\n";
        };
        polyline([](const TrainLog& e) { return e.train_loss; }, "steelblue");
        if (phase == "pretrain")
            polyline([](const TrainLog& e) { return e.holdout_loss; }, "darkorange");
    }
    out << "</svg>\n";
    f << out.str();
}

void write_loss_curve_csv(const std::string& path, const std::vector<TrainLog>& log,
                          const std::string& phase) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write csv: " + path);
    out << "epoch,loss," << (phase == "pretrain" ? "holdout_loss" : "val_mrr")
        << ",wall_time_s\n";
    for (const auto& e : log)
        out << e.epoch << "," << e.train_loss << ","
            << (phase == "pretrain" ? e.holdout_loss : e.val_mrr) << "," << e.wall_seconds
            << "\n";
}

void write_rank_histogram_svg(const std::string& path, const std::vector<double>& ranks) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write plot: " + path);
    // log2-spaced rank buckets: 1, 2, 3-4, 5-8, ...
    std::vector<int64_t> buckets;
    std::vector<std::string> labels;
    double hi = 1.0;
    for (double r : ranks) hi = std::max(hi, r);
    for (double lo = 1.0; lo <= hi; lo = lo * 2) {
        double up = lo * 2 - 1;
        int64_t n = std::count_if(ranks.begin(), ranks.end(),
                                  [&](double r) { return r >= lo && r <= up; });
        buckets.push_back(n);
        labels.push_back(lo == up ? std::to_string(int64_t(lo))
                                  : std::to_string(int64_t(lo)) + "-" +
                                        std::to_string(int64_t(up)));
    }
    std::ostringstream out;
    out << svg_header();
    svg_axes(out, "rank bucket", "test triples");
    int64_t peak = 1;
    for (int64_t b : buckets) peak = std::max(peak, b);
    const double bw = (kW - 1.5 * kPad) / std::max<size_t>(1, buckets.size());
    for (size_t i = 0; i < buckets.size(); ++i) {
        double h = double(buckets[i]) / double(peak) * (kH - 1.5 * kPad);
        double x = kPad + i * bw;
        out << "<rect x=\"" << x + 2 << "\" y=\"" << kH - kPad - h << "\" width=\"" << bw - 4
            << "\" height=\"" << h << "\" fill=\"steelblue\"/>\n";
        out << "<text x=\"" << x + bw / 2 << "\" y=\"" << kH - kPad + 16
            << "\" text-anchor=\"middle\" font-size=\"10\">" << labels[i] << "</text>\n";
        out << "<text x=\"" << x + bw / 2 << "\" y=\"" << kH - kPad - h - 4
            << "\" text-anchor=\"middle\" font-size=\"10\">" << buckets[i] << "</text>\n";
    }
    out << "</svg>\n";
    f << out.str();
}

}  // namespace kglm
