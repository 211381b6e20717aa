#ifndef MIG_CLI_HPP
#define MIG_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mig/errors.hpp"
#include "mig/io.hpp"
#include "mig/methods.hpp"
#include "mig/pooling.hpp"
#include "mig/simbench.hpp"

namespace mig::cli {

/// Every setting of a run. Command-line flags override values read from
/// `--config`; the resolved set is written next to the outputs.
struct JobConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out = "migsel-out";
  std::vector<std::string> methods;
  std::string rule;
  int m_imputations = 5;
  int n_iter = 5;
  int cv_folds = 10;
  bool normalize = false;
  double alpha = 0.05;
  std::string lasso_rule = "1se";
  std::string stacked_folds = "row";
  std::string support = "all";
  // select / refit
  std::string data;
  std::string response = "y";
  std::vector<std::string> columns;
  // simulate / bench
  std::vector<int> p{35};
  std::vector<double> rho{0.2};
  std::vector<double> miss_pct{0.01};
  int replicates = 20;
  int n_train = 200;
  int n_test = 200;
  double protected_frac = 0.25;
  bool refit = false;
};

namespace detail {

inline MethodSettings settings_of(const JobConfig& c) {
  MethodSettings s;
  s.m = c.m_imputations;
  s.n_iter = c.n_iter;
  s.cv_folds = c.cv_folds;
  s.alpha = c.alpha;
  s.lasso_one_se = c.lasso_rule == "1se";
  s.stacked_group_folds = c.stacked_folds == "unit";
  s.support = c.support == "all" ? SupportMode::all_remaining : SupportMode::per_candidate;
  return s;
}

/// Resolves a method name. `mig` and `mignorm` take their rule from --rule
/// (default avg); --normalize turns a MiG variant into its MiGnorm twin.
inline Method resolve_method(const std::string& name, const JobConfig& c) {
  std::string base = name;
  if (base == "mig" || base == "mignorm") {
    const PoolingRule r = c.rule.empty() ? PoolingRule::average_gradient : parse_rule(c.rule);
    const char* suffix = r == PoolingRule::vote ? "-1" : r == PoolingRule::average_gradient ? "-2" : "-3";
    base += suffix;
  } else if (!c.rule.empty()) {
    const Method m = parse_method(base);
    if (!is_mig(m)) throw Error(ErrorKind::input, "--rule applies only to MiG methods");
    const PoolingRule want = parse_rule(c.rule);
    if (mig_config_for(m, {}, 0).rule != want)
      throw Error(ErrorKind::input, "--rule " + c.rule + " contradicts method '" + base + "'");
  }
  Method m = parse_method(base);
  if (c.normalize) {
    if (m == Method::mig_1) m = Method::mignorm_1;
    if (m == Method::mig_2) m = Method::mignorm_2;
    if (m == Method::mig_3) m = Method::mignorm_3;
  }
  return m;
}

inline std::vector<Method> resolve_methods(const JobConfig& c, std::vector<std::string> fallback) {
  const auto& names = c.methods.empty() ? fallback : c.methods;
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(resolve_method(n, c));
  return out;
}

inline std::filesystem::path prepare_out(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::input, "cannot create output directory '" + dir + "': " + ec.message());
  return std::filesystem::path(dir);
}

inline std::string scenario_tag(const SimConfig& s) {
  return "p" + std::to_string(s.p) + "_rho" + io::format_fixed(s.rho, 2) + "_miss" + io::format_fixed(s.miss_pct, 3);
}

inline std::vector<SimConfig> scenarios(const JobConfig& c) {
  std::vector<SimConfig> out;
  for (int p : c.p)
    for (double rho : c.rho)
      for (double miss : c.miss_pct) {
        SimConfig s;
        s.p = p;
        s.rho = rho;
        s.miss_pct = miss;
        s.n_train = c.n_train;
        s.n_test = c.n_test;
        s.protected_frac = c.protected_frac;
        s.replicates = c.replicates;
        s.seed = c.seed;
        s.methods = settings_of(c);
        s.validate();
        out.push_back(s);
      }
  return out;
}

inline std::string names_of(const Dataset& ds, const std::vector<Index>& cols) {
  std::string s;
  for (Index c : cols) s += (s.empty() ? "" : " ") + ds.names()[static_cast<std::size_t>(c)];
  return s;
}

inline nlohmann::json trace_json(const Dataset& ds, const SelectionTrace& t) {
  using nlohmann::json;
  auto names = [&](const std::vector<Index>& cols) {
    json a = json::array();
    for (Index c : cols) a.push_back(ds.names()[static_cast<std::size_t>(c)]);
    return a;
  };
  json j;
  j["complete_rows"] = t.complete_rows;
  j["lasso_lambda"] = t.lasso_lambda;
  j["lasso_set"] = names(t.lasso_set);
  json init = json::array();
  for (const auto& it : t.initial_tests)
    init.push_back({{"variable", ds.names()[static_cast<std::size_t>(it.column)]},
                    {"estimate", it.estimate},
                    {"t", it.test.t},
                    {"df", it.test.df},
                    {"p", it.test.p},
                    {"significant", it.test.significant}});
  j["initial_tests"] = init;
  j["initial_active"] = names(t.initial_active);
  json steps = json::array();
  for (const auto& s : t.steps) {
    json cands = json::array();
    for (std::size_t c = 0; c < s.candidates.size(); ++c) {
      json g = json::array();
      for (Index m = 0; m < s.gradients.rows(); ++m) g.push_back(s.gradients(m, static_cast<Index>(c)));
      cands.push_back({{"variable", ds.names()[static_cast<std::size_t>(s.candidates[c])]},
                       {"gradients", g},
                       {"mean_gradient", s.selection.mean_gradient(static_cast<Index>(c))},
                       {"pooled_gradient", s.pooled_gradient(static_cast<Index>(c))},
                       {"votes", s.selection.votes[c]}});
    }
    json js{{"iteration", s.iteration},
            {"active_before", names(s.active_before)},
            {"support_rows", s.support_size},
            {"per_candidate_support", s.per_candidate_support},
            {"candidates", cands},
            {"chosen", s.chosen >= 0 ? json(ds.names()[static_cast<std::size_t>(s.chosen)]) : json()},
            {"tie_broken", s.selection.tie_broken},
            {"F", s.ftest.f},
            {"nu1", s.ftest.nu1},
            {"nu2", s.ftest.nu2},
            {"p_value", s.ftest.p},
            {"r2_null", s.ftest.r2_null},
            {"r2_alt", s.ftest.r2_alt},
            {"t_chosen", s.t_chosen},
            {"p_t_chosen", s.p_t_chosen},
            {"accepted", s.accepted}};
    if (!s.note.empty()) js["note"] = s.note;
    steps.push_back(js);
  }
  j["steps"] = steps;
  j["selected"] = names(t.active);
  return j;
}

inline void write_snapshot(const std::filesystem::path& dir, const CLI::App& app, const std::string& command) {
  io::write_file((dir / "config.ini").string(), "# command: " + command + "\n" + app.config_to_str(true, false));
}

inline int cmd_simulate(const JobConfig& c, const CLI::App& app, std::ostream& out) {
  const auto dir = prepare_out(c.out);
  write_snapshot(dir, app, "simulate");
  for (const SimConfig& s : scenarios(c)) {
    const SimData d = generate_dataset(s, Stream(s.seed).child("replicate", 0).child("data"));
    const auto sub = prepare_out((dir / scenario_tag(s)).string());
    std::ostringstream train, test, truth;
    io::write_dataset_csv(train, d.train);
    io::write_dataset_csv(test, d.test);
    truth << "variable,beta\n";
    for (Index j = 0; j < s.p; ++j) truth << d.train.names()[static_cast<std::size_t>(j)] << ',' << io::format_exact(d.beta(j)) << '\n';
    io::write_file((sub / "train.csv").string(), train.str());
    io::write_file((sub / "test.csv").string(), test.str());
    io::write_file((sub / "truth.csv").string(), truth.str());
    out << scenario_tag(s) << ": " << complete_cases(d.train).size() << " complete training rows, "
        << io::format_fixed(100.0 * d.realized_fraction, 2) << "% cells missing"
        << (d.calibration_warning ? " (MAR alone exceeds the requested fraction)" : "") << '\n';
  }
  return 0;
}

inline int cmd_select(const JobConfig& c, const CLI::App& app, std::ostream& out) {
  if (c.data.empty()) throw Error(ErrorKind::input, "select needs --data");
  const Dataset ds = io::read_csv_file(c.data, c.response);
  const std::vector<Method> methods = resolve_methods(c, {"mig"});
  if (methods.size() != 1) throw Error(ErrorKind::input, "select takes exactly one --method");
  const Method method = methods.front();
  const MethodSettings settings = settings_of(c);
  const Stream root(c.seed);
  MethodOutput res = run_method(method, ds, settings, root.child("select"));

  const auto dir = prepare_out(c.out);
  write_snapshot(dir, app, "select");

  std::optional<RefitFmi> refit;
  std::string refit_note;
  if (res.selected.empty()) {
    refit_note = "empty selection; nothing to refit";
  } else if (settings.m < 2) {
    refit_note = "refit needs at least two imputations";
  } else {
    try {
      refit = refit_fmi(ds, res.selected, MiceOptions{.m = settings.m, .n_iter = settings.n_iter}, root.child("refit"));
    } catch (const Error& e) {
      refit_note = std::string("refit failed: ") + e.what();
    }
  }

  io::Table table{{"variable", "coefficient", "refit_estimate", "refit_se", "refit_fmi", "refit_df"}, {}};
  for (std::size_t s = 0; s < res.selected.size(); ++s) {
    const Index j = res.selected[s];
    std::vector<std::string> row{ds.names()[static_cast<std::size_t>(j)], io::format_fixed(res.coefficients(j), 6)};
    if (refit) {
      const auto k = static_cast<Index>(s) + 1;
      row.push_back(io::format_fixed(refit->fit.beta_bar(k), 6));
      row.push_back(io::format_fixed(std::sqrt(refit->fit.total(k, k)), 6));
      row.push_back(io::format_fixed(refit->fit.fmi(k), 4));
      row.push_back(io::format_fixed(refit->fit.df(k), 2));
    } else {
      row.insert(row.end(), {"NA", "NA", "NA", "NA"});
    }
    table.rows.push_back(row);
  }
  std::ostringstream csv, txt;
  table.write_csv(csv);
  txt << "method: " << res.label << "\n";
  txt << "observations: " << ds.n() << ", covariates: " << ds.p() << ", complete cases: " << complete_cases(ds).size()
      << "\n";
  txt << "intercept: " << io::format_fixed(res.intercept, 6) << "\n";
  txt << "selected (" << res.selected.size() << "): " << names_of(ds, res.selected) << "\n";
  if (refit)
    txt << "refit phi: " << io::format_fixed(refit->phi, 4) << ", full-model phi: " << io::format_fixed(refit->phi_full, 4)
        << ", ratio: " << (refit->full_model_zero ? std::string("NA") : io::format_fixed(refit->ratio, 4)) << "\n";
  else
    txt << "refit: " << refit_note << "\n";
  txt << "\n";
  table.write_text(txt);
  io::write_file((dir / "selection.csv").string(), csv.str());
  io::write_file((dir / "selection.txt").string(), txt.str());

  nlohmann::json trace;
  trace["method"] = res.label;
  trace["seed"] = c.seed;
  if (res.trace) trace["mig"] = trace_json(ds, *res.trace);
  trace["selected"] = nlohmann::json::array();
  for (Index j : res.selected) trace["selected"].push_back(ds.names()[static_cast<std::size_t>(j)]);
  io::write_file((dir / "trace.json").string(), trace.dump(2) + "\n");
  out << txt.str();
  return 0;
}

inline int cmd_refit(const JobConfig& c, const CLI::App& app, std::ostream& out) {
  if (c.data.empty()) throw Error(ErrorKind::input, "refit needs --data");
  if (c.columns.empty()) throw Error(ErrorKind::input, "refit needs --columns");
  if (c.m_imputations < 2) throw Error(ErrorKind::input, "refit needs --m-imputations >= 2");
  const Dataset ds = io::read_csv_file(c.data, c.response);
  IndexSet cols;
  for (const auto& name : c.columns) {
    auto it = std::find(ds.names().begin(), ds.names().end(), name);
    if (it == ds.names().end()) throw Error(ErrorKind::input, "unknown column '" + name + "'");
    cols.push_back(static_cast<Index>(it - ds.names().begin()));
  }
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  const RefitFmi r = refit_fmi(ds, cols, MiceOptions{.m = c.m_imputations, .n_iter = c.n_iter}, Stream(c.seed).child("refit"));

  const auto dir = prepare_out(c.out);
  write_snapshot(dir, app, "refit");
  io::Table table{{"variable", "estimate", "se", "fmi", "df"}, {}};
  for (std::size_t s = 0; s < cols.size(); ++s) {
    const auto k = static_cast<Index>(s) + 1;
    table.rows.push_back({ds.names()[static_cast<std::size_t>(cols[s])], io::format_fixed(r.fit.beta_bar(k), 6),
                          io::format_fixed(std::sqrt(r.fit.total(k, k)), 6), io::format_fixed(r.fit.fmi(k), 4),
                          io::format_fixed(r.fit.df(k), 2)});
  }
  std::ostringstream csv, txt;
  table.write_csv(csv);
  txt << "columns: " << names_of(ds, cols) << "\n";
  txt << "phi: " << io::format_fixed(r.phi, 6) << "\nfull-model phi: " << io::format_fixed(r.phi_full, 6)
      << "\nratio: " << (r.full_model_zero ? std::string("NA") : io::format_fixed(r.ratio, 6)) << "\n\n";
  table.write_text(txt);
  io::write_file((dir / "refit.csv").string(), csv.str());
  io::write_file((dir / "refit.txt").string(), txt.str());
  out << txt.str();
  return 0;
}

inline std::string mean_sd(const Summary& s, int digits) {
  if (s.count == 0) return "NA";
  return io::format_fixed(s.mean, digits) + " (" + (s.count > 1 ? io::format_fixed(s.sd, digits) : std::string("NA")) + ")";
}

inline int cmd_bench(const JobConfig& c, const CLI::App& app, std::ostream& out) {
  const std::vector<Method> methods = resolve_methods(c, {"ldls", "mils", "ld-lasso-cv", "mi-lasso-s1", "mi-lasso-s2",
                                                          "mi-lasso-s3", "mi-stacked", "mig-1", "mig-2", "mig-3"});
  if (c.jobs < 1) throw Error(ErrorKind::input, "--jobs must be at least 1");
  const std::vector<SimConfig> grid = scenarios(c);
  const auto dir = prepare_out(c.out);
  write_snapshot(dir, app, "bench");

  const std::vector<std::string> metric_names{"L1", "L2", "MSPE", "TP", "TN", "FP", "FN", "MCC"};
  std::vector<std::string> csv_header{"p", "rho", "miss_pct", "method", "replicates", "feasible"};
  for (const auto& m : metric_names) {
    csv_header.push_back(m + "_mean");
    csv_header.push_back(m + "_sd");
  }
  io::Table csv{csv_header, {}};
  io::Table text{{"scenario", "method", "ok", "L1", "L2", "MSPE", "TP", "TN", "FP", "FN", "MCC"}, {}};
  io::Table timing{{"p", "rho", "miss_pct", "method", "seconds_mean", "seconds_sd"}, {}};
  io::Table cc{{"p", "rho", "miss_pct", "replicates", "complete_rows_mean", "complete_rows_sd", "missing_fraction_mean"}, {}};
  io::Table refit_table{{"p", "rho", "miss_pct", "method", "phi_mean", "phi_sd", "ratio_mean", "ratio_sd", "refits",
                         "empty", "failed"},
                        {}};

  for (const SimConfig& s : grid) {
    const BenchReport rep = run_benchmark(s, methods, c.jobs);
    const std::string p = std::to_string(s.p), rho = io::format_fixed(s.rho, 2), miss = io::format_fixed(s.miss_pct, 3);
    std::vector<double> rows(rep.complete_rows.begin(), rep.complete_rows.end());
    const Summary ccs = summarize(rows), frac = summarize(rep.realized_fraction);
    cc.rows.push_back({p, rho, miss, std::to_string(s.replicates), io::format_fixed(ccs.mean, 2),
                       io::format_fixed(ccs.sd, 2), io::format_fixed(frac.mean, 5)});
    for (const MethodSummary& m : rep.summary) {
      std::vector<std::string> row{p, rho, miss, m.method, std::to_string(m.replicates), std::to_string(m.feasible)};
      for (const Summary* x : {&m.l1, &m.l2, &m.mspe, &m.tp, &m.tn, &m.fp, &m.fn, &m.mcc}) {
        row.push_back(io::format_fixed(x->mean, 6));
        row.push_back(io::format_fixed(x->sd, 6));
      }
      csv.rows.push_back(row);
      text.rows.push_back({scenario_tag(s), m.method, std::to_string(m.feasible) + "/" + std::to_string(m.replicates),
                           mean_sd(m.l1, 2), mean_sd(m.l2, 2), mean_sd(m.mspe, 2), mean_sd(m.tp, 2), mean_sd(m.tn, 2),
                           mean_sd(m.fp, 2), mean_sd(m.fn, 2), mean_sd(m.mcc, 2)});
      timing.rows.push_back({p, rho, miss, m.method, io::format_fixed(m.seconds.mean, 6), io::format_fixed(m.seconds.sd, 6)});
    }
    if (c.refit) {
      const RefitReport rr = refit_study(s, methods, c.jobs, 5);
      for (const RefitSummary& m : rr.summary)
        refit_table.rows.push_back({p, rho, miss, m.method, io::format_fixed(m.phi.mean, 6), io::format_fixed(m.phi.sd, 6),
                                    io::format_fixed(m.ratio.mean, 6), io::format_fixed(m.ratio.sd, 6),
                                    std::to_string(m.phi.count), std::to_string(m.empty_selections),
                                    std::to_string(m.infeasible)});
    }
  }
  std::ostringstream a, b, t, d;
  csv.write_csv(a);
  text.write_text(b);
  timing.write_csv(t);
  cc.write_csv(d);
  io::write_file((dir / "report.csv").string(), a.str());
  io::write_file((dir / "report.txt").string(), b.str());
  io::write_file((dir / "timing.csv").string(), t.str());
  io::write_file((dir / "complete_cases.csv").string(), d.str());
  if (c.refit) {
    std::ostringstream r;
    refit_table.write_csv(r);
    io::write_file((dir / "refit.csv").string(), r.str());
  }
  out << b.str();
  return 0;
}

}  // namespace detail

/// Entry point shared by the migsel executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  JobConfig c;
  CLI::App app{"Variable selection on incomplete data: multiple imputation with adaptive greedy forward selection"};
  app.name("migsel");
  app.set_config("--config", "", "Read settings from a flat key = value file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_help_all_flag("--help-all", "Show help for all commands");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print every setting with its resolved value and exit");

  app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app.add_option("--jobs", c.jobs, "Replicate-level worker threads (outputs do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--out", c.out, "Output directory")->capture_default_str();
  app.add_option("--method", c.methods, "Method name(s): mig, mignorm, " + method_names_joined())->delimiter(',');
  app.add_option("--rule", c.rule, "MiG pooling rule")->check(CLI::IsMember({"vote", "avg", "pooled"}));
  app.add_option("--m-imputations", c.m_imputations, "Imputations per imputation step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--n-iter", c.n_iter, "Chained-equation sweeps per imputation")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--cv-folds", c.cv_folds, "Lasso cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  app.add_flag("--normalize", c.normalize, "Standardize all variables before MiG (MiGnorm)");
  app.add_option("--alpha", c.alpha, "Significance level")->capture_default_str()->check(CLI::Range(1e-12, 1.0 - 1e-12));
  app.add_option("--lasso-rule", c.lasso_rule, "Lasso penalty: CV minimum or one-standard-error rule")
      ->capture_default_str()
      ->check(CLI::IsMember({"min", "1se"}));
  app.add_option("--stacked-folds", c.stacked_folds, "Stacked lasso CV folds over stacked rows or observations")
      ->capture_default_str()
      ->check(CLI::IsMember({"row", "unit"}));
  app.add_option("--support", c.support, "Gradient rows: shared over all remaining candidates or per candidate")
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "per-candidate"}));
  app.add_option("--data", c.data, "Input CSV (header row; empty or NA cells are missing)");
  app.add_option("--response", c.response, "Response column name")->capture_default_str();
  app.add_option("--columns", c.columns, "Columns to refit")->delimiter(',');
  app.add_option("--p", c.p, "Covariate count(s)")->capture_default_str()->delimiter(',');
  app.add_option("--rho", c.rho, "Pairwise correlation(s)")->capture_default_str()->delimiter(',');
  app.add_option("--miss-pct", c.miss_pct, "Missing-cell fraction(s)")->capture_default_str()->delimiter(',');
  app.add_option("--replicates", c.replicates, "Replicates per scenario")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--n-train", c.n_train, "Training rows")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--n-test", c.n_test, "Test rows")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--protected-frac", c.protected_frac, "Share of training rows kept complete")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  app.add_flag("--refit", c.refit, "bench: also run the refit fraction-of-missing-information study");

  auto* sim = app.add_subcommand("simulate", "Write simulated train/test CSVs and the true coefficients");
  auto* sel = app.add_subcommand("select", "Run one selector on a CSV");
  auto* bench = app.add_subcommand("bench", "Run the simulation benchmark");
  auto* refit = app.add_subcommand("refit", "Fraction of missing information of a refitted model");
  for (auto* s : {sim, sel, bench, refit}) s->fallthrough();
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  if (print_config) {
    out << app.config_to_str(true, true);
    return 0;
  }
  try {
    if (sim->parsed()) return detail::cmd_simulate(c, app, out);
    if (sel->parsed()) return detail::cmd_select(c, app, out);
    if (bench->parsed()) return detail::cmd_bench(c, app, out);
    if (refit->parsed()) return detail::cmd_refit(c, app, out);
    err << app.help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 5;
  }
}

}  // namespace mig::cli

#endif  // MIG_CLI_HPP
