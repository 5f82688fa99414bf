#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "semhash/cli.hpp"
#include "semhash/error.hpp"
#include "semhash/hamming.hpp"
#include "semhash/retrieval_eval.hpp"

namespace semhash::cli {

namespace {

using conceptsim::SecondPassTemperature;
using conceptsim::SimilarityMode;

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

SecondPassTemperature parse_second_pass(const std::string& s) {
  if (s == "scaled") return SecondPassTemperature::kScaled;
  if (s == "same") return SecondPassTemperature::kSame;
  throw UsageError("--second-pass must be 'scaled' or 'same'");
}

std::vector<std::size_t> parse_points(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("bad precision@N point '" + item + "'");
    }
  }
  return out;
}

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  bool verbose = false;
  std::string config;
};

std::filesystem::path require_config(const GlobalFlags& g) {
  if (g.config.empty()) throw UsageError("--config is required");
  return g.config;
}

int cmd_denoise(const std::vector<std::string>& scores_paths, std::optional<double> tau_abs,
                double tau_mult, const std::string& second_pass, const std::string& out_dir,
                std::ostream& out) {
  std::vector<ScoreMatrix> templates;
  for (const auto& p : scores_paths) templates.push_back(read_score_matrix(p));
  const std::size_t m = templates.front().m();
  const double tau = tau_abs ? *tau_abs : tau_mult * static_cast<double>(m);
  const auto results = conceptsim::denoise_templates(templates, tau, parse_second_pass(second_pass));

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const auto& report = results.front().report;
  write_text(dir / "denoise_report.txt", report.to_text());
  if (results.size() == 1) {
    write_distribution_matrix(dir / "distributions.uhsd", results.front().distributions);
  } else {
    for (std::size_t t = 0; t < results.size(); ++t) {
      write_distribution_matrix(dir / ("distributions_" + std::to_string(t) + ".uhsd"),
                                results[t].distributions);
    }
  }
  out << "tau = " << fmt9(report.tau) << ", kept " << report.kept.size() << " of " << m
      << " concepts\n";
  return kExitOk;
}

int cmd_simgen(const GlobalFlags& g, std::size_t rows, const std::string& out_path, std::ostream& out) {
  const auto cfg = load_run_config(require_config(g));
  std::optional<FeatureMatrix> features;
  if (cfg.features_path) features = read_feature_matrix(*cfg.features_path);
  const auto prepared = prepare_similarity(cfg, features ? &*features : nullptr);
  const std::size_t n = std::min(rows, prepared.source.n());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const auto block = prepared.source.block(idx, idx);

  std::string csv;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j) csv += ',';
      csv += fmt9(block(i, j));
      if (i != j && block(i, j) >= cfg.train.lambda) ++positives;
    }
    csv += '\n';
  }
  write_text(out_path, csv);
  const double pairs = static_cast<double>(n) * static_cast<double>(n > 0 ? n - 1 : 0);
  out << "similarity block " << n << "x" << n << " (" << conceptsim::to_string(cfg.sim_mode)
      << "), positive pair fraction at lambda " << fmt9(cfg.train.lambda) << ": "
      << fmt9(pairs > 0 ? static_cast<double>(positives) / pairs : 0.0) << '\n';
  return kExitOk;
}

int cmd_train(const GlobalFlags& g, std::ostream& out, std::ostream& err) {
  auto cfg = load_run_config(require_config(g));
  if (g.seed) cfg.train.seed = *g.seed;
  if (!cfg.features_path) throw UsageError("config: features_path is required for training");
  const auto features = read_feature_matrix(*cfg.features_path);
  const auto prepared = prepare_similarity(cfg, &features);

  hashnet::EpochObserver observer;
  if (g.verbose) {
    observer = [&err](const hashnet::EpochStats& s) {
      err << "epoch " << s.epoch << ": loss " << fmt9(s.mean.total) << " (l2 " << fmt9(s.mean.l2_term)
          << ", contrastive " << fmt9(s.mean.contrastive_term) << ", quant "
          << fmt9(s.mean.quant_term) << ")\n";
    };
  }
  const auto result = hashnet::train(features, prepared.source, cfg.train, observer);

  std::filesystem::create_directories(cfg.output_dir);
  hashnet::save_params(cfg.output_dir / "model.uhsw", result.params);
  std::string csv = "epoch,total,l2,contrastive,quant\n";
  for (const auto& s : result.history) {
    csv += std::to_string(s.epoch) + "," + fmt9(s.mean.total) + "," + fmt9(s.mean.l2_term) + "," +
           fmt9(s.mean.contrastive_term) + "," + fmt9(s.mean.quant_term) + "\n";
  }
  write_text(cfg.output_dir / "loss_history.csv", csv);
  if (prepared.report) write_text(cfg.output_dir / "denoise_report.txt", prepared.report->to_text());

  out << "trained " << result.history.size() << " epochs";
  if (!result.history.empty()) out << ", final loss " << fmt9(result.history.back().mean.total);
  out << '\n';
  return kExitOk;
}

int cmd_encode(const std::string& model, const std::string& features_path, const std::string& out_path,
               std::ostream& out) {
  const auto params = hashnet::load_params(model);
  const auto features = read_feature_matrix(features_path);
  if (features.d() != params.input_dim) {
    throw DataError("features have dimension " + std::to_string(features.d()) +
                    " but the model expects " + std::to_string(params.input_dim));
  }
  const auto codes = hamming::binarize(hashnet::encode_relaxed(params, features.features));
  write_codes(out_path, codes);
  out << "encoded " << codes.n() << " items into " << codes.k() << "-bit codes\n";
  return kExitOk;
}

struct EvalArgs {
  std::string query_codes, db_codes, query_labels, db_labels, out_dir;
  std::size_t topn = 5000;
  std::string points;
  std::string pr_average = "micro";
};

int cmd_eval(const GlobalFlags& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto queries = read_codes(a.query_codes);
  const auto db = read_codes(a.db_codes);
  const auto qlabels = read_labels(a.query_labels);
  const auto dblabels = read_labels(a.db_labels);
  if (a.topn == 0 || a.topn > db.n()) {
    throw UsageError("--topn " + std::to_string(a.topn) + " exceeds the database size " +
                     std::to_string(db.n()));
  }
  std::vector<std::size_t> points;
  if (a.points.empty()) {
    for (std::size_t p = 100; p <= 1000; p += 100) {
      if (p <= db.n()) points.push_back(p);
    }
    if (points.empty()) points.push_back(db.n());
  } else {
    points = parse_points(a.points);
  }

  eval::EvalOptions opts;
  opts.threads = g.threads;
  if (a.pr_average == "micro") {
    opts.pr_averaging = eval::PrAveraging::kMicro;
  } else if (a.pr_average == "macro") {
    opts.pr_averaging = eval::PrAveraging::kMacro;
  } else {
    throw UsageError("--pr-average must be 'micro' or 'macro'");
  }

  const eval::EvalInputs in{queries, qlabels, db, dblabels};
  const auto report = eval::evaluate(in, a.topn, points, opts);
  eval::write_report(a.out_dir, report);
  if (report.pr.queries_without_relevant > 0) {
    err << "warning: " << report.pr.queries_without_relevant
        << " queries have no relevant database items (excluded from recall)\n";
  }
  out << "MAP@" << report.map_n << " = " << fmt9(report.map) << '\n';
  return kExitOk;
}

int cmd_synth(const GlobalFlags& g, SynthOptions opts, const std::string& out_dir, std::ostream& out) {
  if (g.seed) opts.seed = *g.seed;
  const auto data = generate_synthetic(opts);
  write_synthetic(out_dir, data);
  out << "wrote " << data.db.scores.n() << " database items";
  if (data.queries) out << " and " << data.queries->scores.n() << " queries";
  out << " to " << out_dir << '\n';
  return kExitOk;
}

}  // namespace

PreparedSource prepare_similarity(const RunConfig& cfg, const FeatureMatrix* features) {
  if (cfg.sim_mode == SimilarityMode::kFeatureCosine) {
    if (features == nullptr) throw UsageError("feature-cosine similarity needs features_path");
    return {conceptsim::SimilaritySource(*features), std::nullopt};
  }
  if (!cfg.scores_paths.empty() && !cfg.distributions_paths.empty()) {
    throw UsageError("config: give either scores_path or distributions_path, not both");
  }
  if (!cfg.distributions_paths.empty()) {
    std::vector<DistributionMatrix> dists;
    for (const auto& p : cfg.distributions_paths) dists.push_back(read_distribution_matrix(p));
    return {conceptsim::SimilaritySource(cfg.sim_mode, std::move(dists)), std::nullopt};
  }
  if (cfg.scores_paths.empty()) {
    throw UsageError("config: concept similarity needs scores_path or distributions_path");
  }
  std::vector<ScoreMatrix> templates;
  for (const auto& p : cfg.scores_paths) templates.push_back(read_score_matrix(p));
  const double tau = cfg.tau.resolve(templates.front().m());

  if (cfg.sim_mode == SimilarityMode::kConceptNoDenoise) {
    std::vector<DistributionMatrix> dists;
    for (const auto& s : templates) dists.push_back(conceptsim::concept_distributions(s, tau));
    return {conceptsim::SimilaritySource(cfg.sim_mode, std::move(dists)), std::nullopt};
  }
  auto results = conceptsim::denoise_templates(templates, tau, cfg.second_pass);
  auto report = results.front().report;
  std::vector<DistributionMatrix> dists;
  for (auto& r : results) dists.push_back(std::move(r.distributions));
  return {conceptsim::SimilaritySource(cfg.sim_mode, std::move(dists)), std::move(report)};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concept-similarity hashing toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "PRNG seed override");
  app.add_option("--threads", g.threads, "worker threads for evaluation")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g.verbose, "progress output on stderr");
  app.add_option("--config", g.config, "run configuration file (key=value)");

  auto* denoise = app.add_subcommand("denoise", "denoise a concept set and write distributions");
  std::vector<std::string> denoise_scores;
  double tau_mult = 3.0;
  double tau_abs_value = 0.0;
  std::string second_pass = "scaled";
  std::string denoise_out;
  denoise->add_option("--scores", denoise_scores, "score matrix (repeat for templates)")->required();
  auto* tau_mult_opt = denoise->add_option("--tau-mult", tau_mult, "temperature as a multiple of m");
  auto* tau_abs_opt = denoise->add_option("--tau", tau_abs_value, "absolute temperature");
  tau_mult_opt->excludes(tau_abs_opt);
  denoise->add_option("--second-pass", second_pass, "second-pass temperature: scaled | same");
  denoise->add_option("--out", denoise_out, "output directory")->required();

  auto* simgen = app.add_subcommand("simgen", "write a similarity block for inspection");
  std::size_t sim_rows = 1000;
  std::string sim_out;
  simgen->add_option("--rows", sim_rows, "leading rows/columns to emit");
  simgen->add_option("--out", sim_out, "output CSV")->required();

  auto* train = app.add_subcommand("train", "train the hashing head");

  auto* encode = app.add_subcommand("encode", "encode features into packed codes");
  std::string model_path, features_path, codes_out;
  encode->add_option("--model", model_path)->required();
  encode->add_option("--features", features_path)->required();
  encode->add_option("--out", codes_out)->required();

  auto* evaluate = app.add_subcommand("eval", "retrieval metrics for packed codes");
  EvalArgs ea;
  evaluate->add_option("--query-codes", ea.query_codes)->required();
  evaluate->add_option("--db-codes", ea.db_codes)->required();
  evaluate->add_option("--query-labels", ea.query_labels)->required();
  evaluate->add_option("--db-labels", ea.db_labels)->required();
  evaluate->add_option("--topn", ea.topn, "MAP cutoff");
  evaluate->add_option("--pn", ea.points, "comma-separated precision@N points");
  evaluate->add_option("--pr-average", ea.pr_average, "micro | macro");
  evaluate->add_option("--out", ea.out_dir)->required();

  auto* synth = app.add_subcommand("synth", "generate a separable synthetic dataset");
  SynthOptions so;
  std::string synth_out;
  synth->add_option("--clusters", so.clusters);
  synth->add_option("--per-cluster", so.per_cluster);
  synth->add_option("--concepts", so.concepts);
  synth->add_option("--dim", so.dim);
  synth->add_option("--noise", so.noise);
  synth->add_option("--queries-per-cluster", so.queries_per_cluster);
  synth->add_option("--out", synth_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (*denoise) {
      std::optional<double> tau_abs;
      if (tau_abs_opt->count() > 0) tau_abs = tau_abs_value;
      return cmd_denoise(denoise_scores, tau_abs, tau_mult, second_pass, denoise_out, out);
    }
    if (*simgen) return cmd_simgen(g, sim_rows, sim_out, out);
    if (*train) return cmd_train(g, out, err);
    if (*encode) return cmd_encode(model_path, features_path, codes_out, out);
    if (*evaluate) return cmd_eval(g, ea, out, err);
    if (*synth) return cmd_synth(g, so, synth_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace semhash::cli
