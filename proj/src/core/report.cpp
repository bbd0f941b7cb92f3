// Copyright (c) 2026 The ptq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#include "core/report.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "core/engine.hpp"

namespace ptq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ModelGraph folded_copy(const ModelGraph& g) {
  return g.bn_folded ? g : fold_batchnorm(g);
}

} // namespace

CalibrationProfile make_profile(const ModelGraph& float_model,
                                const Dataset& ds, int64_t samples,
                                uint64_t seed,
                                const std::vector<double>& percentile_ks,
                                uint64_t reservoir_capacity) {
  ModelGraph folded = folded_copy(float_model);

  // QRes placement yields the superset of sites; an FpRes quantization later
  // simply never looks up the Add-output sites.
  QuantPlan site_plan;
  site_plan.wl_w = 8;
  site_plan.wl_a = 8;
  site_plan.weight_method = {ScaleMethod::Kind::AbsMax, 99.99};
  site_plan.act_method = {ScaleMethod::Kind::AbsMax, 99.99};
  site_plan.residual = ResidualMode::QRes;
  ModelGraph planned = insert_quant_nodes(folded, site_plan);

  auto stats = run_calibration(planned, ds.images, samples, seed,
                               reservoir_capacity);

  std::vector<double> ks = percentile_ks;
  ks.push_back(100.0);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  CalibrationProfile profile;
  profile.seed = seed;
  profile.samples = samples;
  profile.reservoir_capacity = reservoir_capacity;
  for (const auto& n : planned.nodes) {
    if (n.kind != NodeKind::Quant) continue;
    auto it = stats.find(n.id);
    if (it == stats.end())
      fail(ErrorCode::Internal, "calibration missed site " + n.id);
    profile.sites.push_back(SiteProfile::from_stats(
        n.id, n.qtag == QuantTag::Residual ? "res" : "act", it->second, ks));
  }
  return profile;
}

ModelGraph build_quantized(const ModelGraph& float_model,
                           const CalibrationProfile& profile,
                           const QuantPlan& plan) {
  ModelGraph folded = folded_copy(float_model);
  ModelGraph planned = insert_quant_nodes(folded, plan);
  ModelGraph resolved = resolve_activation_scales(planned, profile);
  return quantize_weights(resolved);
}

namespace {

double agreement_fraction(const Tensor& logits, const Tensor& reference) {
  const int64_t N = logits.dim(0);
  int64_t match = 0;
  for (int64_t n = 0; n < N; ++n)
    if (argmax_row(logits, n) == argmax_row(reference, n)) match++;
  return double(match) / double(N);
}

void fill_cost_fields(ExperimentRecord& rec, const ModelGraph& g,
                      const EnergyModel& em, int wl_w, int wl_a,
                      bool is_float) {
  rec.macs = mac_count(g);
  if (is_float) {
    rec.footprint_bytes = memory_footprint_bytes(g, 32, 32);
    rec.energy_joules = energy_joules(rec.macs, em.fp32_pj_per_mac());
  } else {
    rec.footprint_bytes = memory_footprint_bytes(g, wl_w, wl_a);
    rec.energy_joules = energy_joules(rec.macs, em.pj_per_mac(wl_w, wl_a));
  }
}

} // namespace

ExperimentRecord evaluate_quantized_graph(const ModelGraph& qg,
                                          const Dataset& ds,
                                          const EnergyModel& em,
                                          const Tensor* float_logits) {
  if (!qg.quantized || !qg.plan)
    fail(ErrorCode::State, "evaluation target is not a quantized model");
  if (ds.labels.empty())
    fail(ErrorCode::InvalidArgument, "evaluation needs a labeled dataset");

  SiteMseMap mse;
  const Tensor logits = forward_all(qg, ds.images, ExecMode::FakeQuant, &mse);

  ExperimentRecord rec;
  rec.plan = *qg.plan;
  rec.top1 = top1_accuracy(logits, ds.labels);
  rec.agreement_with_float =
      float_logits ? agreement_fraction(logits, *float_logits) : rec.top1;
  rec.weight_mse = qg.weight_mse;
  for (const auto& [site, m] : mse) rec.act_mse[site] = m.mse();

  double wsum = 0.0;
  for (const auto& [k, v] : rec.weight_mse) wsum += v;
  rec.weight_mse_mean =
      rec.weight_mse.empty() ? 0.0 : wsum / double(rec.weight_mse.size());
  double asum = 0.0;
  for (const auto& [k, v] : rec.act_mse) asum += v;
  rec.act_mse_mean =
      rec.act_mse.empty() ? 0.0 : asum / double(rec.act_mse.size());

  fill_cost_fields(rec, qg, em, rec.plan.wl_w, rec.plan.wl_a, false);
  return rec;
}

ExperimentRecord evaluate_float_graph(const ModelGraph& g, const Dataset& ds,
                                      const EnergyModel& em) {
  if (ds.labels.empty())
    fail(ErrorCode::InvalidArgument, "evaluation needs a labeled dataset");
  const Tensor logits = forward_all(g, ds.images, ExecMode::Float);

  ExperimentRecord rec;
  rec.is_float = true;
  rec.top1 = top1_accuracy(logits, ds.labels);
  rec.agreement_with_float = 1.0;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Conv2D || n.kind == NodeKind::FullyConnected)
      rec.weight_mse[n.id] = 0.0;
  rec.weight_mse_mean = 0.0;
  rec.act_mse_mean = 0.0;
  fill_cost_fields(rec, g, em, 32, 32, true);
  return rec;
}

std::vector<QuantPlan> enumerate_sweep_plans(SweepGrid grid,
                                             double percentile_k) {
  const std::vector<ScaleMethod::Kind> methods = {ScaleMethod::Kind::AbsMax,
                                                  ScaleMethod::Kind::AbsP};
  std::vector<std::pair<int, int>> wls;
  if (grid == SweepGrid::Full) {
    for (int w = 4; w <= 8; ++w)
      for (int a = 4; a <= 8; ++a) wls.emplace_back(w, a);
  } else {
    for (int b = 6; b <= 8; ++b) wls.emplace_back(b, b);
  }

  std::vector<QuantPlan> plans;
  for (const auto& [w, a] : wls)
    for (auto wsm : methods)
      for (auto am : methods)
        for (auto mode : {AxisGroup::Mode::PerOutputChannel,
                          AxisGroup::Mode::WholeTensor})
          for (auto res : {ResidualMode::FpRes, ResidualMode::QRes}) {
            QuantPlan p;
            p.wl_w = w;
            p.wl_a = a;
            p.weight_method = {wsm, percentile_k};
            p.act_method = {am, percentile_k};
            p.weight_group = mode == AxisGroup::Mode::PerOutputChannel
                                 ? AxisGroup::per_channel(0)
                                 : AxisGroup::whole();
            p.residual = res;
            plans.push_back(p);
          }
  return plans;
}

namespace {

// Weight quantization shared across sweep rows with the same
// (wl_w, wsm, group); 400 rows collapse to at most 20 weight preparations.
struct WeightVariant {
  TensorStore replaced;
  std::map<std::string, double> mse;
};

struct VariantKey {
  int wl_w;
  ScaleMethod::Kind kind;
  double k;
  AxisGroup::Mode mode;
  auto operator<=>(const VariantKey&) const = default;
};

WeightVariant quantize_weight_set(const ModelGraph& folded,
                                  const ScaleMethod& wsm,
                                  AxisGroup::Mode group_mode, int wl_w) {
  WeightVariant v;
  for (const auto& n : folded.nodes) {
    if (n.kind != NodeKind::Conv2D && n.kind != NodeKind::FullyConnected)
      continue;
    const Tensor& w = folded.tensor(n.weight);
    const AxisGroup group = group_mode == AxisGroup::Mode::PerOutputChannel
                                ? AxisGroup::per_channel_of(w)
                                : AxisGroup::whole();
    const QuantParams p = compute_weight_quant_params(w, wsm, group, wl_w);
    Tensor fq = fake_quantize_tensor(w, p);
    v.mse[n.id] = quant_mse(w, fq);
    v.replaced[n.weight] = std::make_shared<Tensor>(std::move(fq));
  }
  return v;
}

} // namespace

std::vector<ExperimentRecord> run_sweep(const ModelGraph& float_model,
                                        const Dataset& ds,
                                        const CalibrationProfile& profile,
                                        SweepGrid grid, const EnergyModel& em,
                                        int jobs, double percentile_k) {
  if (jobs < 1) jobs = 1;
  const ModelGraph folded = folded_copy(float_model);
  const Tensor float_logits =
      forward_all(float_model, ds.images, ExecMode::Float);
  const std::vector<QuantPlan> plans =
      enumerate_sweep_plans(grid, percentile_k);

  // Precompute weight variants serially; rows read them concurrently.
  std::map<VariantKey, WeightVariant> variants;
  for (const QuantPlan& p : plans) {
    const VariantKey key{p.wl_w, p.weight_method.kind, p.weight_method.k,
                         p.weight_group.mode};
    if (!variants.count(key))
      variants.emplace(key, quantize_weight_set(folded, p.weight_method,
                                                p.weight_group.mode, p.wl_w));
  }

  std::vector<ExperimentRecord> records(plans.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= plans.size()) return;
      const QuantPlan& plan = plans[i];
      ExperimentRecord& rec = records[i];
      rec.plan = plan;
      try {
        ModelGraph qg = resolve_activation_scales(
            insert_quant_nodes(folded, plan), profile);
        const WeightVariant& v = variants.at(
            {plan.wl_w, plan.weight_method.kind, plan.weight_method.k,
             plan.weight_group.mode});
        for (const auto& [name, t] : v.replaced) qg.tensors[name] = t;
        qg.weight_mse = v.mse;
        qg.quantized = true;
        rec = evaluate_quantized_graph(qg, ds, em, &float_logits);
      } catch (const Error& e) {
        rec.plan = plan;
        rec.status = "error";
        rec.error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  compute_acc_diff(records);
  return records;
}

// ---------------------------------------------------------------------------
// CSV and JSON emission

namespace {

constexpr const char* kSweepHeader =
    "wl_w,wl_a,wsm,asm,weight_group,residual,percentile_k,top1,agreement,"
    "weight_mse_mean,act_mse_mean,footprint_bytes,energy_joules,macs,"
    "acc_diff,status,error";

std::string sanitize_csv(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

const char* group_name(const AxisGroup& g) {
  return g.mode == AxisGroup::Mode::PerOutputChannel ? "channel" : "layer";
}

void write_record_row(std::ofstream& out, const ExperimentRecord& r) {
  out << r.plan.wl_w << "," << r.plan.wl_a << ","
      << scale_method_name(r.plan.weight_method.kind) << ","
      << scale_method_name(r.plan.act_method.kind) << ","
      << group_name(r.plan.weight_group) << ","
      << residual_mode_name(r.plan.residual) << ","
      << fmt_double(r.plan.act_method.k) << "," << fmt_double(r.top1) << ","
      << fmt_double(r.agreement_with_float) << ","
      << fmt_double(r.weight_mse_mean) << "," << fmt_double(r.act_mse_mean)
      << "," << fmt_double(r.footprint_bytes) << ","
      << fmt_double(r.energy_joules) << "," << r.macs << ","
      << fmt_double(r.acc_diff) << "," << r.status << ","
      << sanitize_csv(r.error) << "\n";
}

} // namespace

void write_sweep_csv(const std::vector<ExperimentRecord>& records,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot open for writing: " + path);
  out << kSweepHeader << "\n";
  for (const auto& r : records) write_record_row(out, r);
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

std::vector<ExperimentRecord> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader)
    fail(ErrorCode::Format, "unexpected sweep CSV header in " + path);

  std::vector<ExperimentRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    if (cells.size() != 17)
      fail(ErrorCode::Format, "bad sweep CSV row: " + line);
    ExperimentRecord r;
    try {
    r.plan.wl_w = std::stoi(cells[0]);
    r.plan.wl_a = std::stoi(cells[1]);
    r.plan.weight_method.kind = parse_scale_method(cells[2]);
    r.plan.act_method.kind = parse_scale_method(cells[3]);
    r.plan.weight_group = cells[4] == "channel" ? AxisGroup::per_channel(0)
                                                : AxisGroup::whole();
    r.plan.residual = parse_residual_mode(cells[5]);
    r.plan.act_method.k = std::stod(cells[6]);
    r.plan.weight_method.k = r.plan.act_method.k;
    r.top1 = std::stod(cells[7]);
    r.agreement_with_float = std::stod(cells[8]);
    r.weight_mse_mean = std::stod(cells[9]);
    r.act_mse_mean = std::stod(cells[10]);
    r.footprint_bytes = std::stod(cells[11]);
    r.energy_joules = std::stod(cells[12]);
    r.macs = uint64_t(std::stoull(cells[13]));
    r.acc_diff = std::stod(cells[14]);
    } catch (const std::exception&) {
      fail(ErrorCode::Format, "bad sweep CSV row: " + line);
    }
    r.status = cells[15];
    r.error = cells[16];
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

std::optional<double> correlate_with_top1(
    const std::vector<ExperimentRecord>& records, bool use_weight_mse) {
  std::vector<double> xs, ys;
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    xs.push_back(use_weight_mse ? r.weight_mse_mean : r.act_mse_mean);
    ys.push_back(r.top1);
  }
  if (xs.size() < 2) return std::nullopt;
  return pearson_correlation(xs, ys);
}

json correlation_json(const std::vector<ExperimentRecord>& records) {
  auto cw = correlate_with_top1(records, true);
  auto ca = correlate_with_top1(records, false);
  json j;
  j["top1_vs_weight_mse"] = cw ? json(*cw) : json(nullptr);
  j["top1_vs_act_mse"] = ca ? json(*ca) : json(nullptr);
  return j;
}

} // namespace

void write_sweep_outputs(std::vector<ExperimentRecord>& records,
                         const std::string& out_dir) {
  if (records.empty())
    fail(ErrorCode::InvalidArgument, "sweep produced no records");
  fs::create_directories(out_dir);
  compute_acc_diff(records);
  write_sweep_csv(records, (fs::path(out_dir) / "sweep.csv").string());

  // Accuracy-vs-MSE scatter data.
  {
    std::ofstream out((fs::path(out_dir) / "sweep_scatter.csv"));
    out << "wl_w,wl_a,wsm,asm,weight_group,residual,weight_mse_mean,"
           "act_mse_mean,top1\n";
    for (const auto& r : records) {
      if (r.status != "ok") continue;
      out << r.plan.wl_w << "," << r.plan.wl_a << ","
          << scale_method_name(r.plan.weight_method.kind) << ","
          << scale_method_name(r.plan.act_method.kind) << ","
          << group_name(r.plan.weight_group) << ","
          << residual_mode_name(r.plan.residual) << ","
          << fmt_double(r.weight_mse_mean) << "," << fmt_double(r.act_mse_mean)
          << "," << fmt_double(r.top1) << "\n";
    }
  }

  // Word-length grid data (accuracy impact heat map).
  {
    std::map<std::pair<int, int>, std::vector<double>> grid;
    for (const auto& r : records)
      if (r.status == "ok")
        grid[{r.plan.wl_w, r.plan.wl_a}].push_back(r.top1);
    std::ofstream out((fs::path(out_dir) / "sweep_grid.csv"));
    out << "wl_w,wl_a,n,mean_top1,min_top1,max_top1\n";
    for (const auto& [wl, accs] : grid) {
      double sum = 0, mn = accs[0], mx = accs[0];
      for (double a : accs) {
        sum += a;
        mn = std::min(mn, a);
        mx = std::max(mx, a);
      }
      out << wl.first << "," << wl.second << "," << accs.size() << ","
          << fmt_double(sum / double(accs.size())) << "," << fmt_double(mn)
          << "," << fmt_double(mx) << "\n";
    }
  }

  json summary;
  summary["rows"] = records.size();
  summary["correlations"] = correlation_json(records);
  std::ofstream out((fs::path(out_dir) / "sweep_summary.json"));
  out << summary.dump(2) << "\n";
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed: sweep_summary.json");
}

namespace {

void write_pareto_csv(const std::vector<ExperimentRecord>& records,
                      bool energy_axis, const std::string& path,
                      std::vector<size_t>& front_out) {
  std::vector<double> cost, acc;
  std::vector<size_t> row_of; // position in `records`
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].status != "ok") continue;
    cost.push_back(energy_axis ? records[i].energy_joules
                               : records[i].footprint_bytes);
    acc.push_back(records[i].top1);
    row_of.push_back(i);
  }
  if (cost.empty()) fail(ErrorCode::InvalidArgument, "no evaluable records");
  const std::vector<size_t> front = pareto_front_indices(cost, acc);

  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot open for writing: " + path);
  out << "cost,top1,wl_w,wl_a,wsm,asm,weight_group,residual\n";
  for (size_t f : front) {
    const ExperimentRecord& r = records[row_of[f]];
    out << fmt_double(cost[f]) << "," << fmt_double(r.top1) << ","
        << r.plan.wl_w << "," << r.plan.wl_a << ","
        << scale_method_name(r.plan.weight_method.kind) << ","
        << scale_method_name(r.plan.act_method.kind) << ","
        << group_name(r.plan.weight_group) << ","
        << residual_mode_name(r.plan.residual) << "\n";
    front_out.push_back(row_of[f]);
  }
}

std::string criterion_value(const ExperimentRecord& r,
                            const std::string& criterion) {
  if (criterion == "wsm") return scale_method_name(r.plan.weight_method.kind);
  if (criterion == "asm") return scale_method_name(r.plan.act_method.kind);
  if (criterion == "weight_group") return group_name(r.plan.weight_group);
  return residual_mode_name(r.plan.residual);
}

} // namespace

void write_report_outputs(const std::vector<ExperimentRecord>& records,
                          const std::string& out_dir) {
  if (records.empty()) fail(ErrorCode::InvalidArgument, "empty sweep report");
  fs::create_directories(out_dir);

  json summary;
  summary["rows"] = records.size();
  summary["correlations"] = correlation_json(records);

  std::vector<size_t> front_f, front_e;
  write_pareto_csv(records, false,
                   (fs::path(out_dir) / "pareto_footprint.csv").string(),
                   front_f);
  write_pareto_csv(records, true,
                   (fs::path(out_dir) / "pareto_energy.csv").string(), front_e);
  summary["pareto_footprint_rows"] = front_f;
  summary["pareto_energy_rows"] = front_e;

  // acc_diff histogram data per criterion (every record lands in exactly one
  // bin per criterion).
  json group_means;
  for (const std::string criterion :
       {"wsm", "asm", "weight_group", "residual"}) {
    std::ofstream out(fs::path(out_dir) / ("accdiff_" + criterion + ".csv"));
    out << "value,acc_diff\n";
    std::map<std::string, std::pair<double, int64_t>> bins;
    for (const auto& r : records) {
      if (r.status != "ok") continue;
      const std::string value = criterion_value(r, criterion);
      out << value << "," << fmt_double(r.acc_diff) << "\n";
      auto& [sum, n] = bins[value];
      sum += r.acc_diff;
      n++;
    }
    json means;
    for (const auto& [value, bin] : bins)
      means[value] = bin.first / double(bin.second);
    group_means[criterion] = means;
  }
  summary["acc_diff_group_means"] = group_means;

  std::ofstream out(fs::path(out_dir) / "report_summary.json");
  out << summary.dump(2) << "\n";
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed: report_summary.json");
}

void write_eval_json(const ExperimentRecord& rec, const ModelGraph& g,
                     const EnergyModel& em, const std::string& path) {
  json j;
  if (rec.is_float) {
    j["plan"] = "float";
  } else {
    json p;
    p["wl_w"] = rec.plan.wl_w;
    p["wl_a"] = rec.plan.wl_a;
    p["wsm"] = scale_method_name(rec.plan.weight_method.kind);
    p["asm"] = scale_method_name(rec.plan.act_method.kind);
    p["weight_group"] = group_name(rec.plan.weight_group);
    p["residual"] = residual_mode_name(rec.plan.residual);
    p["percentile_k"] = rec.plan.act_method.k;
    j["plan"] = p;
  }
  j["top1"] = rec.top1;
  j["agreement_with_float"] = rec.agreement_with_float;
  j["weight_mse"] = rec.weight_mse;
  j["weight_mse_mean"] = rec.weight_mse_mean;
  j["act_mse"] = rec.act_mse;
  j["act_mse_mean"] = rec.act_mse_mean;
  j["footprint_bytes"] = rec.footprint_bytes;
  j["energy_joules"] = rec.energy_joules;
  j["macs"] = rec.macs;
  j["status"] = rec.status;
  if (!rec.error.empty()) j["error"] = rec.error;

  // Memory-access energy per technology, never folded into the MAC figure.
  const double bits = rec.footprint_bytes * 8.0;
  json mem;
  for (const auto& [tech, pj] : em.mem_pj_per_bit())
    mem[tech] = bits * pj * 1e-12;
  j["memory_access_energy_joules"] = mem;
  (void)g;

  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

} // namespace ptq
