#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <omp.h>

#include "semimix/eval.hpp"
#include "semimix/io.hpp"
#include "semimix/simulation.hpp"
#include "svg.hpp"

namespace semimix::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kArtifactVersion = "1.0";

std::uint64_t Common::seed_or(std::uint64_t fallback) const {
  if (seed) return *seed;
  return config.value("seed", fallback);
}

fs::path Common::out_dir() const {
  const fs::path dir = out ? *out : fs::path(config.value("out", std::string("out")));
  fs::create_directories(dir);
  return dir;
}

Mode parse_mode(const std::string& text) {
  if (text == "simultaneous-parametric") return Mode::SimultaneousParametric;
  if (text == "simultaneous-semiparametric") return Mode::SimultaneousSemiParametric;
  if (text == "two-step-parametric") return Mode::TwoStepParametric;
  if (text == "two-step-semiparametric") return Mode::TwoStepSemiParametric;
  throw Error(ErrorKind::InvalidArgument, "unknown mode '" + text + "'");
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::SimultaneousParametric: return "simultaneous-parametric";
    case Mode::SimultaneousSemiParametric: return "simultaneous-semiparametric";
    case Mode::TwoStepParametric: return "two-step-parametric";
    case Mode::TwoStepSemiParametric: return "two-step-semiparametric";
  }
  return "";
}

namespace {

bool is_two_step(Mode m) { return m == Mode::TwoStepParametric || m == Mode::TwoStepSemiParametric; }

EMSettings em_settings(const MethodOptions& o) {
  EMSettings s;
  s.seed = o.seed;
  s.n_starts = o.n_starts;
  return s;
}

MMSettings mm_settings(const MethodOptions& o) {
  MMSettings s;
  s.seed = o.seed;
  s.n_starts = o.n_starts;
  s.kernel = o.kernel;
  return s;
}

KernelConfig kernel_from(const json& cfg) {
  if (!cfg.contains("bandwidth") || cfg["bandwidth"].is_string()) {
    const std::string rule = cfg.value("bandwidth", std::string("n^-1/5"));
    if (rule != "n^-1/5") throw Error(ErrorKind::InvalidArgument, "bandwidth must be \"n^-1/5\" or a number");
    return KernelConfig::fixed_power();
  }
  return KernelConfig::explicit_bandwidth(cfg["bandwidth"].get<double>());
}

MethodOptions options_from(const Common& common, std::uint64_t seed) {
  MethodOptions o;
  o.seed = seed;
  o.n_starts = common.config.value("n_starts", 5);
  o.kernel = kernel_from(common.config);
  o.hard = common.config.value("hard", false);
  return o;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Independent seed per (base, n, replication).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct DesignSpec {
  bool mixed = false;
  SimDesign design;
};

DesignSpec design_from(const json& cfg) {
  DesignSpec d;
  const std::string name = cfg.value("design", std::string("case1"));
  if (name == "mixed") {
    d.mixed = true;
    return d;
  }
  d.design.sim_case = parse_sim_case(name);
  if (cfg.contains("asym_target")) d.design.asym_target = LossSpec::parse(cfg["asym_target"].get<std::string>());
  if (cfg.contains("xi")) d.design.xi = cfg["xi"].get<double>();
  return d;
}

Dataset generate_from(const DesignSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.mixed) {
    MixedDesign m;
    m.n = n;
    m.seed = seed;
    return generate(m);
  }
  SimDesign d = spec.design;
  d.n = n;
  d.seed = seed;
  return generate(d);
}

RegressionCoefficients truth_of(const DesignSpec& spec) {
  return spec.mixed ? MixedDesign{}.beta_true() : spec.design.beta_true();
}

// Order classes by ascending delta.
Permutation canonical_order(const Eigen::VectorXd& delta) {
  Permutation p(static_cast<std::size_t>(delta.size()));
  std::iota(p.begin(), p.end(), 0);
  std::stable_sort(p.begin(), p.end(), [&](int a, int b) { return delta(a) < delta(b); });
  return p;
}

std::vector<double> predict_scaled(const MethodOutput& m, const Dataset& data) {
  if (m.semi) return to_vector(predict(*m.semi, data));
  const ParametricModel& pm = *m.parametric;
  std::vector<double> out(data.n());
  const auto k = static_cast<Eigen::Index>(pm.pi.size());
  for (std::size_t i = 0; i < data.n(); ++i) {
    Eigen::VectorXd lw(k);
    for (Eigen::Index c = 0; c < k; ++c) lw(c) = std::log(pm.pi(c)) + pm.components[c].log_density(data, i);
    const Eigen::VectorXd w = (lw.array() - lw.maxCoeff()).exp();
    const double base = data.u.row(static_cast<Eigen::Index>(i)).dot(pm.coeffs.gamma);
    out[i] = base + w.dot(pm.coeffs.delta) / w.sum();
  }
  return out;
}

}  // namespace

MethodOutput run_method(const Dataset& data, std::size_t k, const LossSpec& loss, Mode mode,
                        const MethodOptions& options, const std::optional<ClusterResult>& clustering) {
  MethodOutput out;
  TwoStepSettings ts;
  ts.em = em_settings(options);
  ts.mm = mm_settings(options);
  ts.hard = options.hard;
  switch (mode) {
    case Mode::SimultaneousParametric: {
      EmFit fit = em_fit(data, k, ParametricNoise::matching(loss), ts.em);
      out.result = std::move(fit.result);
      out.parametric = std::move(fit.model);
      break;
    }
    case Mode::SimultaneousSemiParametric: {
      std::optional<Responsibilities> init;
      if (clustering) init = clustering->t;
      MmFit fit = mm_fit(data, k, loss, ts.mm, init);
      out.result = std::move(fit.result);
      out.semi = std::move(fit.model);
      break;
    }
    case Mode::TwoStepParametric:
    case Mode::TwoStepSemiParametric: {
      const ClusterMode cm = mode == Mode::TwoStepParametric ? ClusterMode::Parametric : ClusterMode::SemiParametric;
      const ClusterResult c = clustering ? *clustering : cluster_x(data, k, cm, ts);
      out.result = two_step_regression(data, c, loss, options.hard);
      break;
    }
  }
  return out;
}

int cmd_simulate(const Common& common) {
  const json& cfg = common.config;
  const DesignSpec spec = design_from(cfg);
  const std::size_t n = cfg.value("n", std::size_t{2000});
  const int reps = cfg.value("replications", 1);
  if (reps < 1) throw Error(ErrorKind::InvalidArgument, "replications must be at least 1");
  const std::uint64_t seed = common.seed_or(0);
  const fs::path dir = common.out_dir();
  const std::string name = cfg.value("design", std::string("case1"));
  json manifest = json::array();
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t s = mix_seed(seed, n, static_cast<std::uint64_t>(r));
    const Dataset data = generate_from(spec, n, s);
    const fs::path csv = dir / (name + "_n" + std::to_string(n) + "_rep" + std::to_string(r + 1) + ".csv");
    io::write_dataset(data, csv);
    manifest.push_back({{"file", csv.filename().string()}, {"seed", s}, {"n", n}});
  }
  write_text(dir / "simulate_manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << reps << " dataset(s) to " << dir.string() << "\n";
  return 0;
}

namespace {

struct Ingested {
  Dataset data;
  std::optional<io::Standardization> scale;
  std::size_t dropped = 0;
  fs::path path;
};

Ingested ingest(const json& cfg) {
  Ingested in;
  if (!cfg.contains("data")) throw Error(ErrorKind::InvalidArgument, "config needs \"data\"");
  in.path = cfg["data"].get<std::string>();
  const fs::path sidecar = cfg.contains("schema") ? fs::path(cfg["schema"].get<std::string>())
                                                  : io::sidecar_path(in.path);
  in.data = io::read_dataset(in.path, sidecar, &in.dropped);
  if (cfg.value("standardize", true)) {
    in.scale = io::Standardization::fit(in.data);
    in.scale->apply(in.data);
  }
  return in;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_vector(m.row(i).transpose()));
  return rows;
}

}  // namespace

int cmd_fit(const Common& common) {
  const json& cfg = common.config;
  Ingested in = ingest(cfg);
  const std::size_t k = cfg.value("k", std::size_t{2});
  const LossSpec loss = LossSpec::parse(cfg.value("loss", std::string("quadratic")));
  const Mode mode = parse_mode(cfg.value("mode", std::string("simultaneous-semiparametric")));
  const std::uint64_t seed = common.seed_or(0);
  const MethodOptions options = options_from(common, seed);
  const double test_fraction = cfg.value("test_fraction", 0.0);
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw Error(ErrorKind::InvalidArgument, "test_fraction must lie in [0, 1)");
  }
  if (test_fraction > 0.0 && is_two_step(mode)) {
    throw Error(ErrorKind::InvalidArgument, "test_fraction needs a simultaneous mode");
  }

  std::vector<std::size_t> train(in.data.n()), test;
  std::iota(train.begin(), train.end(), 0);
  if (test_fraction > 0.0) {
    std::mt19937_64 rng(mix_seed(seed, 0x5e17, 0));
    std::shuffle(train.begin(), train.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(in.data.n())));
    test.assign(train.end() - static_cast<std::ptrdiff_t>(n_test), train.end());
    train.resize(train.size() - n_test);
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
  }
  const Dataset fit_data = test.empty() ? in.data : in.data.subset(train);
  MethodOutput m = run_method(fit_data, k, loss, mode, options);

  const Permutation order = canonical_order(m.result.coeffs.delta);
  const RegressionCoefficients scaled = apply_permutation(m.result.coeffs, order);
  const RegressionCoefficients original = in.scale ? in.scale->to_original(scaled) : scaled;

  json art;
  art["artifact_version"] = kArtifactVersion;
  art["command"] = "fit";
  art["mode"] = to_string(mode);
  art["loss"] = loss.name();
  art["k"] = k;
  art["seed"] = seed;
  art["n_starts"] = options.n_starts;
  art["bandwidth"] = m.semi ? json(m.semi->h) : json(nullptr);
  art["data"] = {{"path", in.path.string()}, {"n", in.data.n()}, {"dropped_rows", in.dropped},
                 {"train_rows", fit_data.n()}};
  art["pi"] = to_vector(apply_permutation(m.result.pi, order));
  json gamma = json::object();
  for (std::size_t j = 0; j < fit_data.d_u(); ++j) {
    const std::string name = j < fit_data.u_names.size() ? fit_data.u_names[j] : "u" + std::to_string(j + 1);
    gamma[name] = original.gamma(static_cast<Eigen::Index>(j));
  }
  art["gamma"] = gamma;
  art["delta"] = to_vector(original.delta);
  art["scaled_coefficients"] = {{"gamma", to_vector(scaled.gamma)}, {"delta", to_vector(scaled.delta)}};
  art["standardization"] = in.scale ? in.scale->to_json() : json(nullptr);
  art["objective"] = m.result.objective();
  art["trajectory"] = m.result.trajectory;
  art["converged"] = m.result.converged;
  art["iterations"] = m.result.iterations;
  art["best_start"] = m.result.best_start;
  art["restarts"] = m.result.restarts;
  art["warnings"] = m.result.warnings;
  art["responsibilities"] = matrix_json(apply_permutation(m.result.t, order));
  if (!test.empty()) {
    art["data"]["train_indices"] = train;
    const Dataset held = in.data.subset(test);
    const std::vector<double> yhat = predict_scaled(m, held);
    double mse = 0.0;
    for (std::size_t i = 0; i < held.n(); ++i) {
      const double y = in.scale ? in.scale->response_to_original(held.y(static_cast<Eigen::Index>(i)))
                                : held.y(static_cast<Eigen::Index>(i));
      const double p = in.scale ? in.scale->response_to_original(yhat[i]) : yhat[i];
      mse += (y - p) * (y - p);
    }
    art["test"] = {{"fraction", test_fraction}, {"n", held.n()}, {"prediction_mse", mse / static_cast<double>(held.n())}};
  } else {
    art["test"] = nullptr;
  }
  if (m.parametric) {
    json comps = json::array();
    for (std::size_t c : order) {
      comps.push_back({{"means", to_vector(m.parametric->components[c].means)},
                       {"variances", to_vector(m.parametric->components[c].variances)}});
    }
    art["components"] = comps;
    art["noise_scale"] = m.parametric->noise.scale;
  }
  if (m.semi) art["noise_location"] = noise_location(*m.semi);

  const fs::path dir = common.out_dir();
  write_text(dir / "fit.json", art.dump(2) + "\n");
  std::cout << "fit written to " << (dir / "fit.json").string() << " (objective " << fmt(m.result.objective())
            << ")\n";
  return 0;
}

namespace {

struct ExperimentRow {
  std::size_t n = 0;
  int replication = 0;
  std::string method;
  std::string loss;
  bool ok = false;
  std::string error;
  EvalReport report;
};

}  // namespace

int cmd_experiment(const Common& common) {
  const json& cfg = common.config;
  const DesignSpec spec = design_from(cfg);
  const std::string design_name = cfg.value("design", std::string("case1"));
  std::vector<std::size_t> sizes;
  if (cfg.contains("n") && cfg["n"].is_array()) {
    sizes = cfg["n"].get<std::vector<std::size_t>>();
  } else {
    sizes.push_back(cfg.value("n", std::size_t{2000}));
  }
  const int reps = cfg.value("replications", 10);
  if (reps < 1) throw Error(ErrorKind::InvalidArgument, "replications must be at least 1");
  std::vector<Mode> modes;
  for (const auto& m : cfg.value("methods", std::vector<std::string>{"simultaneous-semiparametric",
                                                                     "two-step-semiparametric"})) {
    modes.push_back(parse_mode(m));
  }
  std::vector<LossSpec> losses;
  if (cfg.contains("losses")) {
    for (const auto& l : cfg["losses"].get<std::vector<std::string>>()) losses.push_back(LossSpec::parse(l));
  } else {
    losses.push_back(LossSpec::parse(cfg.value("loss", std::string("quadratic"))));
  }
  const std::size_t k = spec.mixed ? MixedDesign::kClasses : SimDesign::kClasses;
  const std::uint64_t seed = common.seed_or(0);
  const RegressionCoefficients truth = truth_of(spec);

  struct Task {
    std::size_t n;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t n : sizes) {
    for (int r = 0; r < reps; ++r) tasks.push_back({n, r});
  }
  std::vector<std::vector<ExperimentRow>> results(tasks.size());

#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, common.jobs))
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Task task = tasks[t];
    const std::uint64_t data_seed = mix_seed(seed, task.n, static_cast<std::uint64_t>(task.rep));
    MethodOptions options = options_from(common, data_seed);
    Dataset data;
    std::string data_error;
    try {
      data = generate_from(spec, task.n, data_seed);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    // X-only clusterings do not depend on the loss; compute each once.
    std::map<ClusterMode, ClusterResult> clusterings;
    for (const LossSpec& loss : losses) {
      for (Mode mode : modes) {
        ExperimentRow row;
        row.n = task.n;
        row.replication = task.rep + 1;
        row.method = to_string(mode);
        row.loss = loss.name();
        if (!data_error.empty()) {
          row.error = data_error;
          results[t].push_back(row);
          continue;
        }
        try {
          std::optional<ClusterResult> cached;
          const bool semi_cluster = mode == Mode::TwoStepSemiParametric || mode == Mode::SimultaneousSemiParametric;
          if (is_two_step(mode) || semi_cluster) {
            const ClusterMode cm = semi_cluster ? ClusterMode::SemiParametric : ClusterMode::Parametric;
            auto it = clusterings.find(cm);
            if (it == clusterings.end()) {
              TwoStepSettings ts;
              ts.em.seed = ts.mm.seed = options.seed;
              ts.em.n_starts = ts.mm.n_starts = options.n_starts;
              ts.mm.kernel = options.kernel;
              it = clusterings.emplace(cm, cluster_x(data, k, cm, ts)).first;
            }
            cached = it->second;
          }
          const MethodOutput m = run_method(data, k, loss, mode, options, cached);
          row.report = evaluate(m.result, data, truth, row.method);
          row.report.replication = static_cast<std::size_t>(row.replication);
          row.ok = true;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        results[t].push_back(row);
      }
    }
  }

  const fs::path dir = common.out_dir();
  const std::size_t n_coef = static_cast<std::size_t>(truth.stacked().size());
  std::ostringstream csv;
  csv << "design,n,replication,method,loss,status,ari,beta_mse";
  for (std::size_t c = 0; c < n_coef; ++c) csv << ",err" << c + 1;
  csv << ",error\n";
  std::map<std::tuple<std::size_t, std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::map<std::tuple<std::size_t, std::string, std::string>, int> failures;
  int failed = 0;
  for (const auto& rows : results) {
    for (const ExperimentRow& r : rows) {
      csv << design_name << ',' << r.n << ',' << r.replication << ',' << r.method << ',' << r.loss << ','
          << (r.ok ? "ok" : "failed") << ',';
      const auto key = std::make_tuple(r.n, r.method, r.loss);
      if (r.ok) {
        csv << fmt(r.report.ari) << ',' << fmt(r.report.beta_mse);
        for (Eigen::Index c = 0; c < r.report.per_coefficient_errors.size(); ++c) {
          csv << ',' << fmt(r.report.per_coefficient_errors(c));
        }
        csv << ",\n";
        groups[key].first.push_back(r.report.beta_mse);
        groups[key].second.push_back(r.report.ari);
      } else {
        csv << ',';
        for (std::size_t c = 0; c < n_coef; ++c) csv << ',';
        std::string msg = r.error;
        std::replace(msg.begin(), msg.end(), ',', ';');
        csv << msg << "\n";
        ++failures[key];
        ++failed;
        std::cerr << "replication " << r.replication << " (n=" << r.n << ", " << r.method << ", " << r.loss
                  << ") failed: " << r.error << "\n";
      }
    }
  }
  write_text(dir / "replications.csv", csv.str());

  std::ostringstream summary;
  summary << "design,n,method,loss,ok,failed,median_beta_mse,median_ari\n";
  std::vector<svg::BoxGroup> mse_boxes, ari_boxes;
  for (std::size_t n : sizes) {
    for (const LossSpec& loss : losses) {
      for (Mode mode : modes) {
        const auto key = std::make_tuple(n, to_string(mode), loss.name());
        const auto& g = groups[key];
        summary << design_name << ',' << n << ',' << to_string(mode) << ',' << loss.name() << ','
                << g.first.size() << ',' << failures[key] << ',' << fmt(median(g.first)) << ','
                << fmt(median(g.second)) << "\n";
        std::string label = to_string(mode);
        if (losses.size() > 1) label += " " + loss.name();
        if (sizes.size() > 1) label += " n=" + std::to_string(n);
        mse_boxes.push_back({label, g.first});
        ari_boxes.push_back({label, g.second});
      }
    }
  }
  write_text(dir / "summary.csv", summary.str());
  write_text(dir / "mse_boxplot.svg", svg::boxplot(mse_boxes, design_name + ": coefficient MSE", "MSE", true));
  write_text(dir / "ari_boxplot.svg", svg::boxplot(ari_boxes, design_name + ": ARI", "ARI"));
  std::cout << summary.str();
  if (failed > 0) std::cerr << failed << " fit(s) failed and were excluded\n";
  return 0;
}

int cmd_select_k(const Common& common) {
  const json& cfg = common.config;
  Dataset data;
  if (cfg.contains("data")) {
    data = ingest(cfg).data;
  } else {
    data = generate_from(design_from(cfg), cfg.value("n", std::size_t{2000}), common.seed_or(0));
  }
  const auto ks = cfg.value("k_range", std::vector<std::size_t>{1, 2, 3, 4});
  std::vector<std::string> loss_names = cfg.value("losses", std::vector<std::string>{});
  if (loss_names.empty()) loss_names.push_back(cfg.value("loss", std::string("quadratic")));
  const MethodOptions options = options_from(common, common.seed_or(0));
  MMSettings s;
  s.seed = options.seed;
  s.n_starts = options.n_starts;
  s.kernel = options.kernel;

  std::ostringstream csv;
  csv << "loss,k,smoothed_loglik,cv_prediction_mse,error\n";
  json out = json::array();
  std::vector<svg::Series> series;
  for (const auto& name : loss_names) {
    const LossSpec loss = LossSpec::parse(name);
    const auto table = select_k(data, ks, loss, s);
    svg::Series line{loss.name(), {}, {}};
    json rows = json::array();
    for (const auto& row : table) {
      std::string msg = row.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      csv << loss.name() << ',' << row.k << ',' << (row.error.empty() ? fmt(row.smoothed_loglik) : "") << ','
          << (row.error.empty() ? fmt(row.cv_prediction_mse) : "") << ',' << msg << "\n";
      rows.push_back({{"k", row.k},
                      {"smoothed_loglik", row.error.empty() ? json(row.smoothed_loglik) : json(nullptr)},
                      {"cv_prediction_mse", row.error.empty() ? json(row.cv_prediction_mse) : json(nullptr)},
                      {"error", row.error}});
      line.x.push_back(static_cast<double>(row.k));
      line.y.push_back(row.error.empty() ? row.smoothed_loglik : std::nan(""));
    }
    json entry = {{"loss", loss.name()}, {"table", rows}};
    try {
      entry["elbow_k"] = elbow_k(table);
    } catch (const Error&) {
      entry["elbow_k"] = nullptr;
    }
    std::size_t best_cv = 0;
    double best = INFINITY;
    for (const auto& row : table) {
      if (row.error.empty() && row.cv_prediction_mse < best) {
        best = row.cv_prediction_mse;
        best_cv = row.k;
      }
    }
    entry["cv_best_k"] = best_cv;
    out.push_back(entry);
    series.push_back(std::move(line));
  }
  const fs::path dir = common.out_dir();
  write_text(dir / "select_k.csv", csv.str());
  write_text(dir / "select_k.json", out.dump(2) + "\n");
  write_text(dir / "select_k.svg",
             svg::line_plot(series, "Smoothed log-likelihood by number of classes", "K", "smoothed log-likelihood"));
  std::cout << csv.str();
  return 0;
}

namespace {

double weighted_quantile(const std::vector<double>& x, const Eigen::VectorXd& w, double p) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const double total = w.sum();
  double acc = 0.0;
  for (std::size_t i : idx) {
    acc += w(static_cast<Eigen::Index>(i));
    if (acc >= p * total) return x[i];
  }
  return x[idx.back()];
}

}  // namespace

int cmd_profile(const Common& common) {
  const json& cfg = common.config;
  if (!cfg.contains("artifact")) throw Error(ErrorKind::InvalidArgument, "config needs \"artifact\"");
  std::ifstream in(cfg["artifact"].get<std::string>());
  if (!in) throw Error(ErrorKind::Io, "cannot read " + cfg["artifact"].get<std::string>());
  json art;
  try {
    art = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("artifact: ") + e.what());
  }
  const std::string data_path = cfg.value("data", art.at("data").at("path").get<std::string>());
  json ingest_cfg = {{"data", data_path}, {"standardize", false}};
  if (cfg.contains("schema")) ingest_cfg["schema"] = cfg["schema"];
  Dataset data = ingest(ingest_cfg).data;
  if (art["data"].contains("train_indices")) {
    data = data.subset(art["data"]["train_indices"].get<std::vector<std::size_t>>());
  }
  const auto rows = art.at("responsibilities");
  if (rows.size() != data.n()) {
    throw Error(ErrorKind::LengthMismatch, "artifact responsibilities do not match the dataset rows");
  }
  const std::size_t k = art.at("k").get<std::size_t>();
  Eigen::MatrixXd t(static_cast<Eigen::Index>(data.n()), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t c = 0; c < k; ++c) t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  }

  const fs::path dir = common.out_dir();
  json out = json::array();
  for (const XColumn& col : data.x) {
    std::ostringstream csv;
    json entry = {{"column", col.name}};
    if (!col.is_continuous()) {
      entry["type"] = "categorical";
      csv << "class";
      for (int l = 0; l < col.cardinality; ++l) {
        csv << ',' << (static_cast<std::size_t>(l) < col.level_names.size() ? col.level_names[l] : std::to_string(l));
      }
      csv << "\n";
      json probs = json::array();
      for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> p(static_cast<std::size_t>(col.cardinality), kLevelPseudoCount);
        double total = kLevelPseudoCount * col.cardinality;
        for (std::size_t i = 0; i < data.n(); ++i) {
          const double w = t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
          p[static_cast<std::size_t>(col.levels[i])] += w;
          total += w;
        }
        csv << c + 1;
        for (double& v : p) {
          v /= total;
          csv << ',' << fmt(v);
        }
        csv << "\n";
        probs.push_back(p);
      }
      entry["levels"] = col.level_names;
      entry["probabilities"] = probs;
    } else {
      entry["type"] = "continuous";
      csv << "class,mean,q25,median,q75\n";
      json stats = json::array();
      for (std::size_t c = 0; c < k; ++c) {
        const Eigen::VectorXd w = t.col(static_cast<Eigen::Index>(c));
        const Eigen::Map<const Eigen::VectorXd> x(col.values.data(), static_cast<Eigen::Index>(data.n()));
        const double mean = w.dot(x) / w.sum();
        const double q25 = weighted_quantile(col.values, w, 0.25), q50 = weighted_quantile(col.values, w, 0.5),
                     q75 = weighted_quantile(col.values, w, 0.75);
        csv << c + 1 << ',' << fmt(mean) << ',' << fmt(q25) << ',' << fmt(q50) << ',' << fmt(q75) << "\n";
        stats.push_back({{"mean", mean}, {"q25", q25}, {"median", q50}, {"q75", q75}});
      }
      entry["summary"] = stats;
    }
    write_text(dir / ("profile_" + col.name + ".csv"), csv.str());
    out.push_back(entry);
  }
  write_text(dir / "profile.json", json{{"classes", k}, {"columns", out}}.dump(2) + "\n");
  std::cout << "profiles for " << data.x.size() << " column(s) written to " << dir.string() << "\n";
  return 0;
}

}  // namespace semimix::cli
