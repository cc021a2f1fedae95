#include "permsig/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <thread>

#include "permsig/error.hpp"
#include "permsig/report.hpp"

namespace permsig {

namespace {

using Json = nlohmann::ordered_json;

struct StudyFlags {
  std::string config_path;
  std::string data_path;
  std::string label_column;
  std::string scheme;
  std::string bound;
  std::optional<int> k;
  std::optional<int> m;
  std::optional<double> alpha;
  std::optional<double> eta;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> blocks;
  std::string out;
  bool force = false;
};

Json default_config() {
  Json j;
  j["data"] = {{"csv", nullptr}, {"label_column", "label"}, {"scale", nullptr}};
  j["pipeline"] = {{"autoencoder", nullptr},    {"reducer", "pls"},     {"pca_components", 1},
                   {"svm_c", 1.0},              {"region_blocks", nullptr}, {"equal_blocks", 0}};
  j["scheme"] = "rub";
  j["k"] = 10;
  j["m"] = 0;
  j["alpha"] = 0.05;
  j["eta"] = 0.05;
  j["bound"] = "empirical";
  j["seed"] = nullptr;
  j["observed_iterations"] = 20;
  j["workers"] = nullptr;
  j["out"] = "report.json";
  return j;
}

const Json& field(const Json& j, const std::string& name) {
  if (!j.is_object() || !j.contains(name)) throw ConfigError("missing config field \"" + name + "\"");
  return j.at(name);
}

double number_field(const Json& j, const std::string& name) {
  const auto& v = field(j, name);
  if (!v.is_number()) throw ConfigError("config field \"" + name + "\" must be a number");
  return v.get<double>();
}

int int_field(const Json& j, const std::string& name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) throw ConfigError("config field \"" + name + "\" must be an integer");
  return v.get<int>();
}

std::string string_field(const Json& j, const std::string& name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw ConfigError("config field \"" + name + "\" must be a string");
  return v.get<std::string>();
}

Activation parse_activation(const std::string& name, const std::string& where) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::Relu;
  if (name == "identity" || name == "linear") return Activation::Identity;
  throw ConfigError("config field \"" + where + "\" has unknown activation \"" + name + "\"");
}

AeArchitecture parse_autoencoder(const Json& j) {
  AeArchitecture arch;
  const auto& widths = field(j, "encoder_widths");
  if (!widths.is_array() || widths.empty()) {
    throw ConfigError("config field \"encoder_widths\" must be a non-empty array");
  }
  for (const auto& w : widths) {
    if (!w.is_number_integer()) throw ConfigError("config field \"encoder_widths\" must hold integers");
    arch.encoder_widths.push_back(w.get<int>());
  }
  const auto act = j.value("activation", Json("sigmoid"));
  if (act.is_string()) {
    arch.encoder_activations.assign(arch.encoder_widths.size(),
                                    parse_activation(act.get<std::string>(), "activation"));
  } else if (act.is_array()) {
    for (const auto& a : act) {
      if (!a.is_string()) throw ConfigError("config field \"activation\" must hold strings");
      arch.encoder_activations.push_back(parse_activation(a.get<std::string>(), "activation"));
    }
  } else {
    throw ConfigError("config field \"activation\" must be a string or array");
  }
  const auto out = j.value("output_activation", std::string("auto"));
  if (out == "auto") arch.output_activation = OutputActivation::Auto;
  else if (out == "sigmoid") arch.output_activation = OutputActivation::Sigmoid;
  else if (out == "identity" || out == "linear") arch.output_activation = OutputActivation::Identity;
  else throw ConfigError("config field \"output_activation\" has unknown value \"" + out + "\"");
  if (j.contains("epochs")) arch.epochs = int_field(j, "epochs");
  if (j.contains("learning_rate")) arch.learning_rate = number_field(j, "learning_rate");
  if (j.contains("batch_size")) arch.batch_size = int_field(j, "batch_size");
  if (j.contains("validation_fraction")) arch.validation_fraction = number_field(j, "validation_fraction");
  return arch;
}

PipelineSpec parse_pipeline(const Json& j, int input_width) {
  PipelineSpec spec;
  const auto& ae = field(j, "autoencoder");
  if (!ae.is_null()) spec.autoencoder = parse_autoencoder(ae);
  const auto reducer = string_field(j, "reducer");
  if (reducer == "pls") spec.reducer = Reduction::Pls;
  else if (reducer == "pca") spec.reducer = Reduction::Pca;
  else if (reducer == "none") spec.reducer = Reduction::None;
  else throw ConfigError("config field \"reducer\" must be pls, pca or none");
  spec.pca_components = int_field(j, "pca_components");
  spec.svm_c = number_field(j, "svm_c");
  const auto& blocks = field(j, "region_blocks");
  const int equal = int_field(j, "equal_blocks");
  if (!blocks.is_null()) {
    if (equal > 0) throw ConfigError("config fields \"region_blocks\" and \"equal_blocks\" are exclusive");
    if (!blocks.is_array()) throw ConfigError("config field \"region_blocks\" must be an array of arrays");
    for (const auto& b : blocks) {
      if (!b.is_array()) throw ConfigError("config field \"region_blocks\" must be an array of arrays");
      std::vector<int> cols;
      for (const auto& c : b) {
        if (!c.is_number_integer()) throw ConfigError("config field \"region_blocks\" must hold column indices");
        cols.push_back(c.get<int>());
      }
      spec.region_blocks.push_back(std::move(cols));
    }
  } else if (equal > 0) {
    spec.region_blocks = equal_blocks(input_width, equal);
  } else if (equal < 0) {
    throw ConfigError("config field \"equal_blocks\" must be non-negative");
  }
  try {
    spec.validate(input_width);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("pipeline: ") + e.what());
  }
  return spec;
}

Dataset load_data(const Json& data, std::uint64_t seed) {
  Dataset d;
  if (data.contains("synthetic") && !data.at("synthetic").is_null()) {
    const auto& s = data.at("synthetic");
    const int classes = s.contains("classes") ? int_field(s, "classes") : 2;
    const int n_per_class = int_field(s, "n_per_class");
    const int dim = int_field(s, "dim");
    const std::uint64_t synth_seed = s.contains("seed") ? s.at("seed").get<std::uint64_t>() : seed;
    const PermutationPlan plan{synth_seed, 0};
    if (classes == 1) {
      d = synth_one_condition(n_per_class, dim, plan);
    } else {
      d = synth_effect(n_per_class, dim, classes, s.contains("effect") ? number_field(s, "effect") : 0.0,
                       plan);
    }
  } else {
    const auto& csv = field(data, "csv");
    if (!csv.is_string()) throw ConfigError("config field \"data.csv\" (or --data) is required");
    d = load_csv(csv.get<std::string>(), string_field(data, "label_column"));
  }
  return d;
}

Scheme parse_scheme(const std::string& s) {
  if (s == "rub") return Scheme::Rub;
  if (s == "resub") return Scheme::Resub;
  if (s == "kfold") return Scheme::KFold;
  throw ConfigError("config field \"scheme\" must be kfold, resub or rub, got \"" + s + "\"");
}

Json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

std::uint64_t env_seed() {
  const char* env = std::getenv("PERMSIG_SEED");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const auto v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError("PERMSIG_SEED must be an unsigned integer");
  return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

int run_study(const std::string& study, const StudyFlags& flags, std::ostream& out) {
  Json config = default_config();
  if (!flags.config_path.empty()) config.merge_patch(read_config_file(flags.config_path));
  if (!flags.data_path.empty()) {
    config["data"]["csv"] = flags.data_path;
    config["data"].erase("synthetic");
  }
  if (!flags.label_column.empty()) config["data"]["label_column"] = flags.label_column;
  if (!flags.scheme.empty()) config["scheme"] = flags.scheme;
  if (!flags.bound.empty()) config["bound"] = flags.bound;
  if (flags.k) config["k"] = *flags.k;
  if (flags.m) config["m"] = *flags.m;
  if (flags.alpha) config["alpha"] = *flags.alpha;
  if (flags.eta) config["eta"] = *flags.eta;
  if (flags.seed) config["seed"] = *flags.seed;
  if (flags.workers) config["workers"] = *flags.workers;
  if (flags.blocks) {
    config["pipeline"]["equal_blocks"] = *flags.blocks;
    config["pipeline"]["region_blocks"] = nullptr;
  }
  if (!flags.out.empty()) config["out"] = flags.out;
  if (config["seed"].is_null()) config["seed"] = env_seed();
  if (!config["seed"].is_number_unsigned() && !config["seed"].is_number_integer()) {
    throw ConfigError("config field \"seed\" must be an unsigned integer");
  }

  StudyConfig sc;
  sc.scheme.kind = parse_scheme(string_field(config, "scheme"));
  sc.scheme.k = int_field(config, "k");
  sc.scheme.eta = number_field(config, "eta");
  const auto bound = string_field(config, "bound");
  if (bound == "empirical") sc.scheme.bound = BoundKind::Empirical;
  else if (bound == "vapnik") sc.scheme.bound = BoundKind::Vapnik;
  else throw ConfigError("config field \"bound\" must be empirical or vapnik");
  sc.m = int_field(config, "m");
  sc.alpha = number_field(config, "alpha");
  sc.master_seed = config["seed"].get<std::uint64_t>();
  sc.observed_iterations = int_field(config, "observed_iterations");
  sc.workers = config["workers"].is_null()
                   ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                   : int_field(config, "workers");
  if (!(sc.alpha > 0.0 && sc.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(sc.alpha));
  if (!(sc.scheme.eta > 0.0 && sc.scheme.eta < 1.0)) throw ConfigError("eta must lie in (0, 1), got " + std::to_string(sc.scheme.eta));
  if (sc.m < 0) throw ConfigError("m must be at least 1");
  if (sc.scheme.kind == Scheme::KFold && sc.scheme.k < 2) throw ConfigError("k must be at least 2 for kfold");
  sc.validate();

  Dataset d = load_data(field(config, "data"), sc.master_seed);
  const auto pipeline = parse_pipeline(field(config, "pipeline"), static_cast<int>(d.cols()));
  const auto& scale = config["data"]["scale"];
  const bool do_scale = scale.is_null() ? pipeline.autoencoder.has_value() : scale.get<bool>();
  if (do_scale) d = scale_unit_interval(d);

  StudyReport report;
  if (study == "power") {
    if (d.class_count < 2) throw ConfigError("power study needs data with at least 2 classes");
    report = power_study(PipelineLearner(pipeline), d, sc);
  } else if (study == "type1") {
    if (d.class_count != 1) {
      throw ConfigError("type1 study needs single-condition data, got " +
                        std::to_string(d.class_count) + " classes");
    }
    report = type1_study(PipelineLearner(pipeline), d, sc);
  } else {
    report = alt_scheme_study(pipeline, d, sc);
  }

  // Resolved configuration, minus settings that cannot change the result.
  Json resolved = config;
  resolved.erase("workers");
  resolved.erase("out");
  resolved["m"] = sc.resolved_m();
  resolved["data"]["scale"] = do_scale;

  Json doc = report_json(report);
  doc["config"] = resolved;

  std::filesystem::path json_path = string_field(config, "out");
  if (!flags.force) json_path = non_colliding_path(json_path);
  auto csv_path = json_path;
  csv_path.replace_extension(".hist.csv");
  write_text(json_path, doc.dump(2) + "\n");
  write_text(csv_path, histogram_csv(report.histogram));

  const std::string name = report.study + " " + scheme_name(report.scheme.kind);
  if (report.fwe_rate) {
    out << name << ": FWE rate " << format4(*report.fwe_rate) << " [" << format4(*report.fwe_rate_sd)
        << "] at alpha " << report.alpha << ", null " << format4(report.null_summary.mean) << " ["
        << format4(report.null_summary.sd) << "], M=" << report.null.statistics.size() << '\n';
  } else {
    out << name << ": p-value " << format4(report.p_value) << " [" << format4(report.p_value_sd)
        << "], observed " << format4(report.observed.mean) << ", null "
        << format4(report.null_summary.mean) << " [" << format4(report.null_summary.sd)
        << "], M=" << report.null.statistics.size() << ", "
        << (report.rejected ? "H0 rejected" : "H0 not rejected") << " at alpha " << report.alpha
        << '\n';
  }
  out << "report: " << json_path.string() << '\n';
  return kExitOk;
}

void add_study_flags(CLI::App* cmd, StudyFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--data", flags.data_path, "CSV data file (overrides the config)");
  cmd->add_option("--label-column", flags.label_column, "Label column name in the CSV");
  cmd->add_option("--scheme", flags.scheme, "Validation scheme: kfold, resub or rub");
  cmd->add_option("--bound", flags.bound, "Bound for rub: empirical or vapnik");
  cmd->add_option("--k", flags.k, "Folds for kfold");
  cmd->add_option("--m", flags.m, "Permutation count");
  cmd->add_option("--alpha", flags.alpha, "Significance level");
  cmd->add_option("--eta", flags.eta, "Bound confidence parameter");
  cmd->add_option("--seed", flags.seed, "Master seed (falls back to PERMSIG_SEED)");
  cmd->add_option("--workers", flags.workers, "Worker threads");
  cmd->add_option("--blocks", flags.blocks, "Split features into this many equal region blocks");
  cmd->add_option("--out", flags.out, "Report path (JSON); histogram CSV written alongside");
  cmd->add_flag("--force", flags.force, "Overwrite an existing report");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Permutation-test significance of classification pipelines"};
  app.require_subcommand(1);

  StudyFlags power_flags;
  StudyFlags type1_flags;
  StudyFlags alt_flags;
  auto* power = app.add_subcommand("power", "Statistical power study (label permutation)");
  auto* type1 = app.add_subcommand("type1", "Type-I error control study on single-condition data");
  auto* alt = app.add_subcommand("alt", "Study with feature extraction outside the permutation loop");
  add_study_flags(power, power_flags);
  add_study_flags(type1, type1_flags);
  add_study_flags(alt, alt_flags);

  auto* bound = app.add_subcommand("bound", "Print the empirical and Vapnik upper bounds");
  std::int64_t bound_n = 0;
  std::int64_t bound_d = 1;
  double bound_eta = 0.05;
  bound->add_option("--n", bound_n, "Training-set size")->required();
  bound->add_option("--d", bound_d, "Classifier input dimension");
  bound->add_option("--eta", bound_eta, "Significance level of the bound");

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset as CSV");
  int n_per_class = 50;
  int dim = 10;
  int classes = 2;
  double effect = 0.0;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out;
  bool synth_force = false;
  synth->add_option("--n-per-class", n_per_class, "Samples per class (total samples when classes=1)");
  synth->add_option("--dim", dim, "Feature count");
  synth->add_option("--classes", classes, "Class count; 1 writes single-condition data");
  synth->add_option("--effect", effect, "Mean shift between consecutive classes");
  synth->add_option("--seed", synth_seed, "Seed (falls back to PERMSIG_SEED)");
  synth->add_option("--out", synth_out, "Output CSV path")->required();
  synth->add_flag("--force", synth_force, "Overwrite an existing file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*bound) {
      BoundSpec spec{bound_n, bound_d, bound_eta, BoundKind::Empirical};
      const double emp = empirical_bound(spec);
      spec.kind = BoundKind::Vapnik;
      const double vc = vapnik_bound(spec);
      out << "empirical " << format4(emp) << '\n' << "vapnik " << format4(vc) << '\n';
      return kExitOk;
    }
    if (*synth) {
      const PermutationPlan plan{synth_seed ? *synth_seed : env_seed(), 0};
      const Dataset d = classes == 1 ? synth_one_condition(n_per_class, dim, plan)
                                     : synth_effect(n_per_class, dim, classes, effect, plan);
      std::filesystem::path path = synth_out;
      if (!synth_force) path = non_colliding_path(path);
      save_csv(d, path);
      out << "wrote " << d.rows() << " rows to " << path.string() << '\n';
      return kExitOk;
    }
    if (*power) return run_study("power", power_flags, out);
    if (*type1) return run_study("type1", type1_flags, out);
    return run_study("alt", alt_flags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUnexpected;
  }
}

}  // namespace permsig
