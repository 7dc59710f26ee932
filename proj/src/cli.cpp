#include "hhws/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "hhws/aim.hpp"
#include "hhws/data.hpp"
#include "hhws/error.hpp"
#include "hhws/eval.hpp"
#include "hhws/mars.hpp"
#include "hhws/methods.hpp"
#include "hhws/mob.hpp"
#include "hhws/prim.hpp"
#include "hhws/report.hpp"
#include "hhws/sim.hpp"

namespace hhws {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + what + ": '" + s + "'");
  }
}

struct Options {
  // common
  std::string config;
  std::string out = "out";
  std::size_t workers = 1;
  bool keep_going = false;
  std::optional<std::uint64_t> seed;
  // methods
  std::string methods = "mob,mars,prim,aim,segmented,gam";
  std::string family;
  std::string slope = "default";
  std::size_t min_node = 5;
  double prim_alpha = 0.05;
  bool no_paste = false;
  std::size_t mars_max_terms = 21;
  int mars_degree = 2;
  // simulate
  std::string grid = "small";
  std::size_t replicates = 100;
  std::size_t n = 1000;
  // data
  std::string data;
  std::string date_column = "date";
  std::string count_column = "y";
  std::string indicators;
  std::string covariates;
  std::string lags;
  std::string season = "05-01:09-30";
  int df_season = 4;
  double df_per_decade = 1.0;
  std::string thresholds;
  std::string cutpoints = "30,35,40,45,50";
  int gap = 3;
};

std::vector<std::string> method_list(const Options& o) {
  std::vector<std::string> out;
  for (const auto& m : split(o.methods, ',')) {
    if (!is_method(m)) throw ConfigError("unknown method: " + m);
    out.push_back(m);
  }
  return out;
}

SeasonWindow parse_season(const std::string& s) {
  unsigned a = 0, b = 0, c = 0, d = 0;
  char t1 = 0, t2 = 0, t3 = 0;
  std::istringstream in(s);
  if (!(in >> a >> t1 >> b >> t2 >> c >> t3 >> d) || t1 != '-' || t2 != ':' || t3 != '-' || a < 1 || a > 12 ||
      c < 1 || c > 12 || b < 1 || b > 31 || d < 1 || d > 31) {
    throw ConfigError("season must look like MM-DD:MM-DD, got '" + s + "'");
  }
  return SeasonWindow{a, b, c, d};
}

// Every setting that changes results, in a fixed key order.
Json canonical(const std::string& command, const Options& o) {
  Json j = Json::object();
  j["command"] = command;
  j["version"] = kVersion;
  if (o.seed) j["seed"] = *o.seed;
  if (command == "simulate") {
    j["grid"] = o.grid;
    j["B"] = o.replicates;
    j["n"] = o.n;
  } else {
    j["data"] = o.data;
    j["date_column"] = o.date_column;
    j["count_column"] = o.count_column;
    j["indicators"] = o.indicators;
    j["covariates"] = o.covariates;
    j["lags"] = o.lags;
    j["season"] = o.season;
    j["df_season"] = o.df_season;
    j["df_per_decade"] = o.df_per_decade;
    j["thresholds"] = o.thresholds;
    j["cutpoints"] = o.cutpoints;
    j["gap"] = o.gap;
    if (command == "bootstrap") j["B"] = o.replicates;
  }
  if (command != "evaluate") {
    j["methods"] = o.methods;
    j["family"] = o.family.empty() ? std::string(command == "simulate" ? "gaussian" : "quasipoisson") : o.family;
    j["slope"] = o.slope;
    j["min_node"] = o.min_node;
    j["prim_alpha"] = o.prim_alpha;
    j["paste"] = !o.no_paste;
    j["mars_max_terms"] = o.mars_max_terms;
    j["mars_degree"] = o.mars_degree;
  }
  return j;
}

class Output {
 public:
  Output(const std::string& dir, Json manifest) : dir_(dir), manifest_(std::move(manifest)) {
    fs::create_directories(dir_);
    hash_ = hash_hex(fnv1a(manifest_.dump()));
    manifest_["manifest_hash"] = hash_;
    std::ofstream(dir_ / "manifest.json") << manifest_.dump(2) << '\n';
  }

  [[nodiscard]] const std::string& hash() const { return hash_; }

  std::ofstream csv(const std::string& name) const {
    std::ofstream f(dir_ / name);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << "# manifest_hash=" << hash_ << '\n';
    return f;
  }

  void json(const std::string& name, Json body) const {
    body["manifest_hash"] = hash_;
    std::ofstream f(dir_ / name);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << body.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  Json manifest_;
  std::string hash_;
};

MethodSettings method_settings(const Options& o, const Dataset* data, Family fallback) {
  MethodSettings s;
  s.family = o.family.empty() ? fallback : parse_family(o.family);
  s.min_node = o.min_node;
  s.prim_alpha = o.prim_alpha;
  s.prim_paste = !o.no_paste;
  s.mars_max_terms = o.mars_max_terms;
  s.mars_degree = o.mars_degree;
  if (o.slope == "mean") {
    s.slope_mean = true;
  } else if (o.slope == "all") {
    s.slope_mean = false;
  } else if (o.slope != "default") {
    if (!data) throw ConfigError("--slope names indicators and needs a dataset");
    for (const auto& name : split(o.slope, ',')) s.slope_columns.push_back(data->indicator_index(name));
  }
  return s;
}

Dataset load_data(const Options& o) {
  if (o.data.empty()) throw ConfigError("--data is required");
  CsvSchema schema;
  schema.date_column = o.date_column;
  schema.count_column = o.count_column;
  schema.indicator_columns = split(o.indicators, ',');
  schema.covariate_columns = split(o.covariates, ',');
  if (schema.indicator_columns.empty()) throw ConfigError("--indicators is required");
  const auto season = parse_season(o.season);
  Dataset d = load_csv(o.data, schema, season);
  if (!o.lags.empty()) {
    std::vector<double> w;
    for (const auto& s : split(o.lags, ',')) w.push_back(to_double(s, "--lags"));
    d = apply_lags(d, LagWeights(std::move(w)));
  }
  return with_calendar_covariates(std::move(d), SplineSpec{o.df_season, o.df_per_decade}, season);
}

ThresholdSet parse_thresholds(const std::string& text, const Dataset& d) {
  ThresholdSet t("Reference", d.names);
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("threshold must be name=value: '" + item + "'");
    const auto name = item.substr(0, eq);
    t.bounds[d.indicator_index(name)] = to_double(item.substr(eq + 1), name);
  }
  if (!t.any_selected()) throw ConfigError("--thresholds selects no indicator");
  return t;
}

std::vector<double> parse_cutpoints(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split(text, ',')) out.push_back(to_double(s, "--cutpoints"));
  return out;
}

int cmd_simulate(const Options& o) {
  if (!o.seed) throw ConfigError("simulate requires --seed");
  std::vector<Scenario> grid;
  if (o.grid == "paper") grid = paper_grid();
  else if (o.grid == "small") grid = small_grid();
  else throw ConfigError("unknown grid: " + o.grid);
  for (auto& s : grid) s.n = o.n;

  StudyOptions study;
  study.replicates = o.replicates;
  study.methods = method_list(o);
  study.settings = method_settings(o, nullptr, Family::Gaussian);
  study.seed = *o.seed;
  study.workers = o.workers;

  const Output out(o.out, canonical("simulate", o));
  const auto table = run_study(grid, study);
  {
    auto f = out.csv("scores.csv");
    write_scores_csv(f, table);
  }
  {
    auto f = out.csv("summary.csv");
    write_summary_csv(f, table, summarize(table));
  }
  const auto failed = std::count_if(table.rows.begin(), table.rows.end(),
                                    [](const ScoreRow& r) { return r.status == "failed"; });
  std::cout << table.rows.size() << " rows, " << failed << " failed fits, written to " << o.out << '\n';
  return failed > 0 && !o.keep_going ? 3 : 0;
}

// Summary-table evaluation of one threshold set.
Json evaluate_set(const ThresholdSet& t, const Dataset& d, const Vector& om, const std::vector<double>& cuts,
                  int gap, std::ostream& table_csv, std::ostream& cut_csv) {
  Json j = to_json(t);
  std::vector<std::string> row{t.method};
  for (const auto& b : t.bounds) row.push_back(b ? format_number(*b) : "NA");
  if (!t.any_selected()) {
    j["n_alerts"] = 0;
    j["n_episodes"] = 0;
    j["mean_om"] = nullptr;
    j["coverage"] = 0.0;
    row.insert(row.end(), {"0", "0", "NA", "0"});
    write_csv_row(table_csv, row);
    return j;
  }
  const auto a = alerts(d, t);
  const double m = mean_over_alerts(om, a);
  j["n_alerts"] = count(a);
  j["n_episodes"] = episodes(d.dates, a, gap);
  j["mean_om"] = count(a) ? Json(m) : Json(nullptr);
  j["coverage"] = coverage(om, a);
  row.insert(row.end(), {std::to_string(count(a)), std::to_string(episodes(d.dates, a, gap)),
                         count(a) ? format_number(m) : "NA", format_number(coverage(om, a))});
  write_csv_row(table_csv, row);

  Json cj = Json::array();
  for (double u : cuts) {
    const auto s = confusion_scores(a, om_events(om, u));
    cj.push_back({{"cut", u}, {"sensitivity", s.sensitivity}, {"precision", s.precision}, {"f_score", s.f_score}});
    write_csv_row(cut_csv, {t.method, format_number(u), format_number(s.sensitivity), format_number(s.precision),
                            format_number(s.f_score)});
  }
  j["cutpoints"] = cj;
  return j;
}

int cmd_fit(const Options& o, bool evaluate_only) {
  const Dataset d = load_data(o);
  const auto cuts = parse_cutpoints(o.cutpoints);
  const Vector om = over_mortality(d.y, expected_mortality(d, SplineSpec{o.df_season, o.df_per_decade},
                                                           parse_season(o.season)));
  const Output out(o.out, canonical(evaluate_only ? "evaluate" : "fit", o));

  std::vector<ThresholdSet> sets;
  std::vector<std::pair<std::string, std::string>> failures;
  if (!evaluate_only) {
    const auto settings = method_settings(o, &d, Family::QuasiPoisson);
    LocalModel model;
    model.family = settings.family;
    model.slope.columns = settings.slope_columns;
    for (const auto& key : method_list(o)) {
      try {
        if (key == "prim") {
          PrimConfig cfg;
          cfg.alpha = settings.prim_alpha;
          cfg.paste = settings.prim_paste;
          cfg.model = model;
          cfg.model.slope.mean = settings.slope_mean.value_or(true);
          const auto r = fit_prim(d, cfg);
          auto f = out.csv("prim_trajectory.csv");
          write_trajectory_csv(f, r.trajectory);
          sets.push_back(r.thresholds);
        } else if (key == "mob") {
          MobConfig cfg;
          cfg.min_node = settings.min_node;
          cfg.model = model;
          cfg.model.slope.mean = settings.slope_mean.value_or(false);
          const auto tree = grow(d, cfg);
          out.json("mob_tree.json", to_json(tree));
          sets.push_back(extract_thresholds(tree));
        } else if (key == "mars") {
          MarsConfig cfg;
          cfg.max_terms = settings.mars_max_terms;
          cfg.degree = settings.mars_degree;
          cfg.min_span = settings.min_node;
          cfg.min_box = settings.min_node;
          cfg.family = settings.family;
          const auto r = fit_mars(d, cfg);
          out.json("mars_knots.json", mars_json(r.refit.model, d.names));
          sets.push_back(r.thresholds);
        } else if (key == "aim") {
          const auto m = select_k_cv(d, AimConfig{settings.aim_max_splits, settings.aim_folds});
          out.json("aim_rules.json", aim_json(m, d.names));
          sets.push_back(extract_thresholds_aim(m, d.names));
        } else {
          sets.push_back(make_method(key, settings)(d));
        }
      } catch (const std::exception& e) {
        failures.emplace_back(method_label(key), e.what());
        std::cerr << method_label(key) << " failed: " << e.what() << '\n';
      }
    }
  }
  if (!o.thresholds.empty()) sets.push_back(parse_thresholds(o.thresholds, d));
  if (evaluate_only && sets.empty()) throw ConfigError("evaluate requires --thresholds");

  auto table = out.csv("table.csv");
  auto cut_csv = out.csv("cutpoints.csv");
  {
    std::vector<std::string> header{"method"};
    header.insert(header.end(), d.names.begin(), d.names.end());
    header.insert(header.end(), {"n_alerts", "n_episodes", "mean_om", "coverage"});
    write_csv_row(table, header);
    write_csv_row(cut_csv, {"method", "cut", "sensitivity", "precision", "f_score"});
  }
  Json methods = Json::array();
  for (const auto& t : sets) methods.push_back(evaluate_set(t, d, om, cuts, o.gap, table, cut_csv));
  for (const auto& [name, msg] : failures) methods.push_back({{"method", name}, {"error", msg}});
  out.json(evaluate_only ? "evaluation.json" : "thresholds.json",
           Json{{"n", d.n()}, {"indicators", d.names}, {"methods", methods}});
  return !failures.empty() && !o.keep_going ? 3 : 0;
}

int cmd_bootstrap(const Options& o) {
  if (!o.seed) throw ConfigError("bootstrap requires --seed");
  const Dataset d = load_data(o);
  const auto settings = method_settings(o, &d, Family::QuasiPoisson);
  const auto keys = method_list(o);
  const Output out(o.out, canonical("bootstrap", o));

  auto raw = out.csv("bootstrap_raw.csv");
  auto summary = out.csv("bootstrap_summary.csv");
  {
    std::vector<std::string> header{"method", "replicate", "status"};
    header.insert(header.end(), d.names.begin(), d.names.end());
    write_csv_row(raw, header);
    write_csv_row(summary, {"method", "variable", "q025", "q50", "q975", "selected", "not_selected", "failed"});
  }
  std::size_t failed = 0;
  for (const auto& key : keys) {
    const auto res = bootstrap_summary(make_method(key, settings), d, o.replicates, *o.seed, o.workers);
    const auto label = method_label(key);
    for (const auto& r : res.rows) {
      std::vector<std::string> row{label, std::to_string(r.replicate)};
      if (!r.thresholds) {
        ++failed;
        row.push_back("failed");
        row.insert(row.end(), d.p(), "NA");
      } else {
        row.push_back(r.thresholds->any_selected() ? "ok" : "no_selection");
        for (const auto& b : r.thresholds->bounds) row.push_back(b ? format_number(*b) : "NA");
      }
      write_csv_row(raw, row);
    }
    for (const auto& v : res.variables) {
      write_csv_row(summary, {label, v.name, format_number(v.q025), format_number(v.q50), format_number(v.q975),
                              format_number(v.selected), format_number(v.not_selected), format_number(v.failed)});
    }
  }
  std::cout << keys.size() << " methods x " << o.replicates << " replicates, " << failed
            << " failed, written to " << o.out << '\n';
  return failed > 0 && !o.keep_going ? 3 : 0;
}

// Converts config-file entries into flags placed before the command line ones.
std::vector<std::string> config_args(const std::string& path, CLI::App* sub) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json cfg;
  try {
    cfg = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  std::vector<std::string> out;
  for (const auto& [key, value] : cfg.items()) {
    const auto* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
    if (!opt) throw ConfigError("unknown config key for " + sub->get_name() + ": " + key);
    if (value.is_boolean()) {
      if (opt->get_expected_max() != 0) throw ConfigError("config key " + key + " needs a value");
      if (value.get<bool>()) out.push_back("--" + key);
      continue;
    }
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& v : value) text += (text.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
    } else if (value.is_number()) {
      text = value.dump();
    } else {
      throw ConfigError("unsupported value for config key " + key);
    }
    out.push_back("--" + key);
    out.push_back(text);
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  Options o;
  CLI::App app{"Heat-health warning threshold estimation", "hhws"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  const auto add_common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "JSON file of option values; flags win");
    s->add_option("--out", o.out, "Output directory");
    s->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    s->add_flag("--keep-going", o.keep_going, "Exit 0 even when some fits failed");
  };
  const auto add_methods = [&](CLI::App* s) {
    s->add_option("--methods", o.methods, "Comma list of mob,mars,prim,aim,segmented,gam");
    s->add_option("--family", o.family, "quasipoisson or gaussian");
    s->add_option("--slope", o.slope, "Node/box slope terms: default, all, mean, or a comma list of indicators");
    s->add_option("--min-node", o.min_node, "Minimum node, span and box size")->check(CLI::PositiveNumber);
    s->add_option("--prim-alpha", o.prim_alpha, "PRIM peeling fraction")->check(CLI::Range(0.0, 0.5));
    s->add_flag("--no-paste", o.no_paste, "Disable PRIM pasting");
    s->add_option("--mars-max-terms", o.mars_max_terms, "MARS forward-pass term limit");
    s->add_option("--mars-degree", o.mars_degree, "MARS interaction degree")->check(CLI::Range(1, 2));
  };
  const auto add_data = [&](CLI::App* s) {
    s->add_option("--data", o.data, "Input CSV");
    s->add_option("--date-column", o.date_column);
    s->add_option("--count-column", o.count_column);
    s->add_option("--indicators", o.indicators, "Comma list of indicator columns");
    s->add_option("--covariates", o.covariates, "Comma list of extra covariate columns");
    s->add_option("--lags", o.lags, "Lag weights w0,w1,... summing to 1");
    s->add_option("--season", o.season, "Season window MM-DD:MM-DD");
    s->add_option("--df-season", o.df_season)->check(CLI::PositiveNumber);
    s->add_option("--df-per-decade", o.df_per_decade)->check(CLI::NonNegativeNumber);
    s->add_option("--cutpoints", o.cutpoints, "OM cut points (percent)");
    s->add_option("--gap", o.gap, "Episode merge gap in days")->check(CLI::NonNegativeNumber);
  };
  const auto add_seed = [&](CLI::App* s) {
    s->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; }, "Master seed");
  };

  auto* sim = app.add_subcommand("simulate", "Simulation study over a scenario grid");
  add_common(sim);
  add_methods(sim);
  add_seed(sim);
  sim->add_option("--grid", o.grid, "paper (40 scenarios) or small (8)");
  sim->add_option("--B", o.replicates, "Replicates per scenario")->check(CLI::PositiveNumber);
  sim->add_option("--n", o.n, "Rows per replicate")->check(CLI::PositiveNumber);

  auto* fit = app.add_subcommand("fit", "Estimate thresholds on a CSV dataset");
  add_common(fit);
  add_methods(fit);
  add_data(fit);
  fit->add_option("--thresholds", o.thresholds, "Reference thresholds name=value,...");

  auto* boot = app.add_subcommand("bootstrap", "Year-block bootstrap of the thresholds");
  add_common(boot);
  add_methods(boot);
  add_data(boot);
  add_seed(boot);
  boot->add_option("--B", o.replicates, "Bootstrap replicates")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("evaluate", "Score given thresholds without fitting");
  add_common(eval);
  add_data(eval);
  eval->add_option("--thresholds", o.thresholds, "Thresholds name=value,...")->required();

  try {
    std::vector<std::string> argv = args;
    // The config file is read first so command-line flags override it.
    if (!args.empty()) {
      CLI::App* sub = nullptr;
      for (auto* s : {sim, fit, boot, eval}) {
        if (s->get_name() == args[0]) sub = s;
      }
      std::string path;
      for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      }
      if (sub && !path.empty()) {
        auto extra = config_args(path, sub);
        argv.insert(argv.begin() + 1, extra.begin(), extra.end());
      }
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (fit->parsed()) return cmd_fit(o, false);
    if (boot->parsed()) return cmd_bootstrap(o);
    if (eval->parsed()) return cmd_fit(o, true);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace hhws
