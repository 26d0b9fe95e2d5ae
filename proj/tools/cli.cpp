#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ganf/config_json.hpp"
#include "ganf/numfmt.hpp"
#include "ganf/spectrum.hpp"

namespace ganf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVariants[] = {"conventional", "artifact_free"};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> image_size;
  std::optional<std::size_t> steps;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_file, "JSON run config");
  cmd->add_option("--set", o.overrides, "override, e.g. training.learning_rate=1e-4 (repeatable)");
  cmd->add_option("--seed", o.seed, "top-level seed (wins over the file)");
  cmd->add_option("--output-dir", o.output_dir, "run directory");
  cmd->add_option("--image-size", o.image_size, "image size for generator, discriminator and dataset");
  cmd->add_option("--steps", o.steps, "training.total_steps");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

RunConfig resolve(const CommonOptions& o) {
  json doc = json::object();
  if (!o.config_file.empty()) doc = read_json_file(o.config_file);
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& a : o.overrides) apply_override(doc, a);
  RunConfig c = run_config_from_json(doc);
  if (o.seed) {
    c.seed = *o.seed;
    c.training.rng_seed = c.dataset.rng_seed = *o.seed;
  }
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.image_size) c.generator.image_size = c.discriminator.image_size = c.dataset.image_size = *o.image_size;
  if (o.steps) c.training.total_steps = *o.steps;
  c.validate();
  return c;
}

std::vector<fs::path> image_inputs(const fs::path& input) {
  if (fs::is_directory(input)) return list_images(input);
  if (!fs::exists(input)) throw std::runtime_error("input " + input.string() + " does not exist");
  return {input};
}

std::vector<ImageBuffer> load_dir_checked(const fs::path& dir, std::size_t size, const char* role) {
  if (!fs::is_directory(dir)) throw std::runtime_error(std::string(role) + " directory " + dir.string() + " does not exist");
  return load_folder(dir, size);
}

// ---- commands --------------------------------------------------------------

int cmd_synth(const CommonOptions& o, const std::string& out_dir, std::ostream& out) {
  const RunConfig c = resolve(o);
  const fs::path root = out_dir.empty() ? fs::path(c.output_dir) / "data" : fs::path(out_dir);
  write_dataset(synth_dataset(c.dataset), root);
  write_json_file(fs::path(c.output_dir) / "resolved_config.json", to_json(c));
  out << json{{"command", "synth"},
              {"dataset", root.string()},
              {"n_train", c.dataset.n_train},
              {"n_test", c.dataset.n_test}}
             .dump()
      << '\n';
  return 0;
}

struct TrainOptions {
  std::string variant = "both";
  std::string data;
  std::optional<std::uint64_t> until;
  std::uint64_t checkpoint_every = 0;
  bool resume = false;
  bool progress = false;
};

json train_variant(const RunConfig& base, const std::string& variant, const TrainOptions& t, const Dataset& data,
                   std::ostream& err) {
  RunConfig c = base;
  c.generator.artifact_free = variant == "artifact_free";
  const fs::path dir = fs::path(c.output_dir) / variant;
  fs::create_directories(dir);
  const fs::path ckpt = dir / "checkpoint.bin";

  CycleGAN model = t.resume ? CycleGAN::load(ckpt) : CycleGAN(c.generator, c.discriminator, c.training);
  if (t.resume && model.generator_config().artifact_free != c.generator.artifact_free) {
    throw std::runtime_error("checkpoint " + ckpt.string() + " belongs to the other variant");
  }
  const std::uint64_t until = t.until.value_or(model.training_config().total_steps);
  write_json_file(dir / "resolved_config.json",
                  json{{"variant", variant}, {"resumed", t.resume}, {"until", until}, {"config", to_json(c)}});

  const std::uint64_t chunk = t.checkpoint_every ? t.checkpoint_every : until;
  try {
    while (model.step() < until) {
      model.train(data.a.train, data.b.train, std::min(until, model.step() + chunk));
      model.save(ckpt);
      if (t.progress) {
        const auto& r = model.history().back();
        err << variant << " step " << r.step << " adv_d " << format_double(r.adv_d()) << " adv_g "
            << format_double(r.adv_g()) << " cycle " << format_double(r.cycle()) << '\n';
      }
    }
  } catch (const TrainingError&) {
    write_loss_csv(dir / "losses.csv", model.history());
    throw;
  }
  model.save(ckpt);
  write_loss_csv(dir / "losses.csv", model.history());
  const auto& last = model.history().empty() ? LossRecord{} : model.history().back();
  return {{"variant", variant},
          {"step", model.step()},
          {"checkpoint", ckpt.string()},
          {"cycle", last.cycle()},
          {"adv_d", last.adv_d()},
          {"adv_g", last.adv_g()}};
}

int cmd_train(const CommonOptions& o, const TrainOptions& t, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve(o);
  if (t.variant != "both" && t.variant != kVariants[0] && t.variant != kVariants[1]) {
    throw UsageError("--variant must be conventional, artifact_free or both");
  }
  const fs::path data_root = t.data.empty() ? fs::path(c.output_dir) / "data" : fs::path(t.data);
  if (!fs::is_directory(data_root)) {
    throw std::runtime_error("dataset " + data_root.string() + " not found; run `gan-forensics synth` first");
  }
  const Dataset data = load_dataset(data_root, c.generator.image_size);
  write_json_file(fs::path(c.output_dir) / "resolved_config.json", to_json(c));
  json results = json::array();
  for (const char* v : kVariants) {
    if (t.variant == "both" || t.variant == v) results.push_back(train_variant(c, v, t, data, err));
  }
  out << json{{"command", "train"}, {"runs", results}}.dump() << '\n';
  return 0;
}

struct GenerateOptions {
  std::string checkpoint;
  std::string input;
  std::string output;
  std::string direction = "ab";
};

int cmd_generate(const GenerateOptions& g, std::ostream& out) {
  if (g.direction != "ab" && g.direction != "ba") throw UsageError("--direction must be ab or ba");
  const CycleGAN model = CycleGAN::load(g.checkpoint);
  const Generator& gen = g.direction == "ab" ? model.g_ab() : model.g_ba();
  const std::size_t size = model.generator_config().image_size;
  const auto inputs = image_inputs(g.input);
  fs::create_directories(g.output);
  for (const auto& path : inputs) {
    save_image(generate(gen, fit_to_size(load_image(path), size)), fs::path(g.output) / (path.stem().string() + ".png"));
  }
  out << json{{"command", "generate"}, {"direction", g.direction}, {"count", inputs.size()}, {"output", g.output}}.dump()
      << '\n';
  return 0;
}

struct SpectrumOptions {
  std::string input;
  std::string output;
  double threshold = 1.0;
};

int cmd_spectrum(const SpectrumOptions& s, std::ostream& out) {
  const auto inputs = image_inputs(s.input);
  if (inputs.empty()) throw std::runtime_error("no images found in " + s.input);
  const fs::path dir(s.output);
  fs::create_directories(dir);
  json images = json::array();
  double ratio_sum = 0.0;
  for (const auto& path : inputs) {
    const ImageBuffer img = load_image(path);
    const std::string stem = path.stem().string();
    const SpectrumProfile profile = log_spectrum(img);
    write_spectrum_pgm(profile, dir / (stem + ".spectrum.pgm"));
    write_spectrum_2d_csv(profile, dir / (stem + ".spectrum2d.csv"));
    write_spectrum_1d_csv(profile, dir / (stem + ".spectrum1d.csv"));
    const ArtifactReport report = analyze_artifacts(img, s.threshold);
    write_json_file(dir / (stem + ".artifacts.json"), to_json(report));
    images.push_back({{"file", path.filename().string()},
                      {"nyquist_energy_ratio", report.nyquist_energy_ratio},
                      {"n_peaks", report.peak_frequencies.size()}});
    ratio_sum += report.nyquist_energy_ratio;
  }
  const json summary{{"count", inputs.size()},
                     {"mean_nyquist_energy_ratio", ratio_sum / static_cast<double>(inputs.size())},
                     {"prominence_threshold", s.threshold},
                     {"images", images}};
  write_json_file(dir / "artifact_summary.json", summary);
  out << json{{"command", "spectrum"},
              {"count", inputs.size()},
              {"mean_nyquist_energy_ratio", summary["mean_nyquist_energy_ratio"]}}
             .dump()
      << '\n';
  return 0;
}

struct DetectOptions {
  std::string real;
  std::string fake;
  std::string model;
  std::string report;
};

int cmd_detect_train(const CommonOptions& o, const DetectOptions& d, std::ostream& out) {
  const RunConfig c = resolve(o);
  const std::size_t size = c.generator.image_size;
  const auto reals = load_dir_checked(d.real, size, "real");
  const auto fakes = load_dir_checked(d.fake, size, "fake");
  const DetectorModel model = train_detector(reals, fakes, c.detector);
  const fs::path path(d.model);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_detector(model, path);
  write_json_file(fs::path(path.string() + ".config.json"),
                  json{{"real", d.real}, {"fake", d.fake}, {"config", to_json(c)}});
  out << json{{"command", "detect train"},
              {"model", d.model},
              {"n_real", reals.size()},
              {"n_fake", fakes.size()},
              {"training_accuracy", model.training_accuracy}}
             .dump()
      << '\n';
  return 0;
}

int cmd_detect_eval(const DetectOptions& d, std::ostream& out) {
  const DetectorModel model = load_detector(d.model);
  const auto reals = load_dir_checked(d.real, model.image_width, "real");
  const auto fakes = load_dir_checked(d.fake, model.image_width, "fake");
  if (fakes.empty()) throw std::runtime_error("fake directory " + d.fake + " has no images; ACC(Fake) is undefined");
  const DetectionReport report = evaluate(model, reals, fakes);
  if (!d.report.empty()) {
    const fs::path path(d.report);
    write_json_file(path, to_json(report));
    write_text_file(fs::path(path).replace_extension(".csv"), report_csv(report));
  }
  out << to_json(report).dump() << '\n';
  return 0;
}

int cmd_report(const std::string& run_dir, std::ostream& out) {
  const fs::path root(run_dir);
  std::ostringstream csv, md;
  csv << "variant,n_tn,n_tp,n_fn,n_fp,n_qf,n_qr,acc,acc_fake,mean_nyquist_energy_ratio\n";
  md << "# Detection report\n\n"
     << "| variant | ACC | ACC(Fake) | N_tn | N_tp | N_Qf | N_Qr | mean Nyquist energy ratio |\n"
     << "|---|---|---|---|---|---|---|---|\n";
  double acc_fake[2] = {0, 0}, ratio[2] = {0, 0};
  for (int i = 0; i < 2; ++i) {
    const fs::path det = root / kVariants[i] / "detection.json";
    const fs::path spec = root / kVariants[i] / "spectra" / "artifact_summary.json";
    for (const auto& p : {det, spec}) {
      if (!fs::exists(p)) throw std::runtime_error("report input " + p.string() + " is missing");
    }
    const DetectionReport r = report_from_json(read_json_file(det));
    ratio[i] = read_json_file(spec).at("mean_nyquist_energy_ratio").get<double>();
    acc_fake[i] = r.acc_fake;
    csv << kVariants[i] << ',' << r.n_tn << ',' << r.n_tp << ',' << r.n_fn << ',' << r.n_fp << ',' << r.n_qf << ','
        << r.n_qr << ',' << format_double(r.acc) << ',' << format_double(r.acc_fake) << ','
        << format_double(ratio[i]) << '\n';
    md << "| " << kVariants[i] << " | " << format_double(r.acc) << " | " << format_double(r.acc_fake) << " | "
       << r.n_tn << " | " << r.n_tp << " | " << r.n_qf << " | " << r.n_qr << " | " << format_double(ratio[i])
       << " |\n";
  }
  md << "\nACC(Fake) drop (conventional - artifact_free): " << format_double(acc_fake[0] - acc_fake[1]) << "\n"
     << "Nyquist ratio quotient (artifact_free / conventional): "
     << (ratio[0] > 0.0 ? format_double(ratio[1] / ratio[0]) : std::string("undefined")) << "\n";
  write_text_file(root / "report.csv", csv.str());
  write_text_file(root / "report.md", md.str());
  out << json{{"command", "report"}, {"csv", (root / "report.csv").string()}, {"markdown", (root / "report.md").string()}}
             .dump()
      << '\n';
  return 0;
}

void print_error(std::ostream& err, const char* kind, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

// ---- RunConfig -------------------------------------------------------------

void RunConfig::validate() const {
  try {
    generator.validate();
    discriminator.validate();
    training.validate();
    dataset.validate();
    detector.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (generator.image_size != discriminator.image_size || generator.image_size != dataset.image_size) {
    throw ConfigError("generator, discriminator and dataset image_size must agree");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"generator", ganf::to_json(c.generator)},
          {"discriminator", ganf::to_json(c.discriminator)},
          {"training", ganf::to_json(c.training)},
          {"dataset", ganf::to_json(c.dataset)},
          {"detector", ganf::to_json(c.detector)}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& item : j.items()) {
    static const char* known[] = {"seed", "output_dir", "generator", "discriminator", "training", "dataset", "detector"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return item.key() == k; }) ==
        std::end(known)) {
      throw ConfigError("unknown key '" + item.key() + "' in run config");
    }
  }
  RunConfig c;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) throw ConfigError("seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("output_dir: expected a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  c.training.rng_seed = c.dataset.rng_seed = c.seed;
  // A lone image_size in the generator section sizes the whole run.
  if (j.contains("generator")) from_json(j["generator"], c.generator);
  c.discriminator.image_size = c.dataset.image_size = c.generator.image_size;
  if (j.contains("discriminator")) from_json(j["discriminator"], c.discriminator);
  if (j.contains("training")) from_json(j["training"], c.training);
  if (j.contains("dataset")) from_json(j["dataset"], c.dataset);
  if (j.contains("detector")) from_json(j["detector"], c.detector);
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Checkerboard-free CycleGAN training and spectral fake-image forensics", "gan-forensics"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write the synthetic two-domain dataset");
  add_common(synth, common);
  synth->add_option("--out", synth_out, "dataset root (default <output_dir>/data)");

  TrainOptions topt;
  auto* train = app.add_subcommand("train", "train conventional and/or artifact-free CycleGANs");
  add_common(train, common);
  train->add_option("--variant", topt.variant, "conventional | artifact_free | both");
  train->add_option("--data", topt.data, "dataset root (default <output_dir>/data)");
  train->add_option("--until", topt.until, "stop once this step is reached (default training.total_steps)");
  train->add_option("--checkpoint-every", topt.checkpoint_every, "save every N steps");
  train->add_flag("--resume", topt.resume, "continue from <output_dir>/<variant>/checkpoint.bin");
  train->add_flag("--progress", topt.progress, "print losses to stderr at each checkpoint");

  GenerateOptions gopt;
  auto* gen = app.add_subcommand("generate", "translate images with a trained generator");
  gen->add_option("--checkpoint", gopt.checkpoint)->required();
  gen->add_option("--input", gopt.input, "image file or directory")->required();
  gen->add_option("--output", gopt.output, "output directory")->required();
  gen->add_option("--direction", gopt.direction, "ab (G_AB) or ba (G_BA)");

  SpectrumOptions sopt;
  auto* spec = app.add_subcommand("spectrum", "log spectra, profiles and artifact reports");
  spec->add_option("--input", sopt.input, "image file or directory")->required();
  spec->add_option("--output", sopt.output, "output directory")->required();
  spec->add_option("--threshold", sopt.threshold, "peak prominence threshold in log-magnitude units");

  DetectOptions dopt;
  auto* detect = app.add_subcommand("detect", "train or evaluate the spectrum detector");
  detect->require_subcommand(1);
  auto* dtrain = detect->add_subcommand("train", "fit the detector");
  add_common(dtrain, common);
  auto* deval = detect->add_subcommand("eval", "evaluate a detector and emit ACC / ACC(Fake)");
  for (auto* sub : {dtrain, deval}) {
    sub->add_option("--real", dopt.real, "directory of real images")->required();
    sub->add_option("--fake", dopt.fake, "directory of fake images")->required();
    sub->add_option("--model", dopt.model, "detector JSON path")->required();
  }
  deval->add_option("--report", dopt.report, "report JSON path (a CSV is written alongside)");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "compare both variants of a run");
  report->add_option("--run-dir", run_dir)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (*synth) return cmd_synth(common, synth_out, out);
    if (*train) return cmd_train(common, topt, out, err);
    if (*gen) return cmd_generate(gopt, out);
    if (*spec) return cmd_spectrum(sopt, out);
    if (*dtrain) return cmd_detect_train(common, dopt, out);
    if (*deval) return cmd_detect_eval(dopt, out);
    if (*report) return cmd_report(run_dir, out);
  } catch (const ConfigError& e) {
    print_error(err, "config", e.what());
    return 2;
  } catch (const UsageError& e) {
    print_error(err, "usage", e.what());
    return 2;
  } catch (const TrainingError& e) {
    print_error(err, "training", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    print_error(err, "invalid", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "runtime", e.what());
    return 1;
  }
  print_error(err, "usage", "no command given");
  return 2;
}

}  // namespace ganf::cli
