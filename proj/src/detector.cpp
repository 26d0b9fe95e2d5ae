#include "ganf/detector.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ganf/numfmt.hpp"
#include "ganf/spectrum.hpp"

namespace ganf {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> standardized(const DetectorModel& m, std::vector<double> f) {
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = (f[i] - m.feature_mean[i]) / m.feature_scale[i];
  return f;
}

double linear_score(const DetectorModel& m, const std::vector<double>& z) {
  double s = m.bias;
  for (std::size_t i = 0; i < z.size(); ++i) s += m.weights[i] * z[i];
  return sigmoid(s);
}

}  // namespace

void DetectorConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("DetectorConfig: learning_rate must be positive");
  if (l2 < 0.0) throw std::invalid_argument("DetectorConfig: l2 must be non-negative");
}

void DetectorModel::validate() const {
  const std::size_t n = weights.size();
  if (n == 0 || feature_mean.size() != n || feature_scale.size() != n) {
    throw std::invalid_argument("DetectorModel: inconsistent feature vectors");
  }
  if (n != image_width / 2 + 1) {
    throw std::invalid_argument("DetectorModel: feature length " + std::to_string(n) +
                                " does not match image width " + std::to_string(image_width));
  }
}

const char* label_name(Label label) { return label == Label::Real ? "real" : "fake"; }

std::vector<double> spectral_features(const ImageBuffer& image) { return log_spectrum(image).spectrum_1d; }

DetectorModel train_detector(const std::vector<ImageBuffer>& real_images,
                             const std::vector<ImageBuffer>& fake_images, const DetectorConfig& config) {
  config.validate();
  if (real_images.empty() || fake_images.empty()) {
    throw std::invalid_argument("train_detector: both real and fake sets must be non-empty");
  }
  const std::size_t h = real_images.front().height(), w = real_images.front().width();
  std::vector<std::vector<double>> features;
  std::vector<double> labels;
  auto add = [&](const std::vector<ImageBuffer>& set, double label, const char* name) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set[i].height() != h || set[i].width() != w) {
        throw std::invalid_argument(std::string("train_detector: ") + name + " image " + std::to_string(i) +
                                    " is " + std::to_string(set[i].height()) + "x" +
                                    std::to_string(set[i].width()) + ", expected " + std::to_string(h) +
                                    "x" + std::to_string(w));
      }
      features.push_back(spectral_features(set[i]));
      labels.push_back(label);
    }
  };
  add(real_images, 1.0, "real");
  add(fake_images, 0.0, "fake");

  DetectorModel m;
  m.image_height = h;
  m.image_width = w;
  const std::size_t dim = features.front().size();
  const double count = static_cast<double>(features.size());
  m.feature_mean.assign(dim, 0.0);
  m.feature_scale.assign(dim, 0.0);
  for (const auto& f : features) {
    for (std::size_t i = 0; i < dim; ++i) m.feature_mean[i] += f[i];
  }
  for (double& v : m.feature_mean) v /= count;
  for (const auto& f : features) {
    for (std::size_t i = 0; i < dim; ++i) m.feature_scale[i] += (f[i] - m.feature_mean[i]) * (f[i] - m.feature_mean[i]);
  }
  for (double& v : m.feature_scale) {
    v = std::sqrt(v / count);
    if (v < 1e-12) v = 1.0;
  }
  for (auto& f : features) f = standardized(m, std::move(f));

  m.weights.assign(dim, 0.0);
  std::vector<double> grad(dim);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t s = 0; s < features.size(); ++s) {
      const double err = linear_score(m, features[s]) - labels[s];
      for (std::size_t i = 0; i < dim; ++i) grad[i] += err * features[s][i];
      grad_b += err;
    }
    for (std::size_t i = 0; i < dim; ++i) {
      m.weights[i] -= config.learning_rate * (grad[i] / count + config.l2 * m.weights[i]);
    }
    m.bias -= config.learning_rate * grad_b / count;
  }
  m.iterations = config.iterations;

  std::size_t correct = 0;
  for (std::size_t s = 0; s < features.size(); ++s) {
    const bool predicted_real = linear_score(m, features[s]) >= 0.5;
    if (predicted_real == (labels[s] == 1.0)) ++correct;
  }
  m.training_accuracy = static_cast<double>(correct) / count;
  return m;
}

Classification classify(const DetectorModel& detector, const ImageBuffer& image) {
  if (image.height() != detector.image_height || image.width() != detector.image_width) {
    throw std::invalid_argument("classify: detector expects " + std::to_string(detector.image_height) + "x" +
                                std::to_string(detector.image_width) + " images, got " +
                                std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  const double score = linear_score(detector, standardized(detector, spectral_features(image)));
  return {score < 0.5 ? Label::Fake : Label::Real, score};
}

DetectionReport DetectionReport::from_counts(std::size_t n_tn, std::size_t n_tp, std::size_t n_qf,
                                             std::size_t n_qr) {
  if (n_qf == 0) throw std::invalid_argument("DetectionReport: no fake queries, ACC(Fake) is undefined");
  if (n_tn > n_qf || n_tp > n_qr) throw std::invalid_argument("DetectionReport: counts exceed query sizes");
  DetectionReport r;
  r.n_tn = n_tn;
  r.n_tp = n_tp;
  r.n_qf = n_qf;
  r.n_qr = n_qr;
  r.n_fp = n_qf - n_tn;
  r.n_fn = n_qr - n_tp;
  r.acc = static_cast<double>(n_tn + n_tp) / static_cast<double>(n_qf + n_qr);
  r.acc_fake = static_cast<double>(n_tn) / static_cast<double>(n_qf);
  return r;
}

DetectionReport evaluate(const DetectorModel& detector, const std::vector<ImageBuffer>& real_set,
                         const std::vector<ImageBuffer>& fake_set) {
  if (fake_set.empty()) throw std::invalid_argument("evaluate: empty fake set, ACC(Fake) is undefined");
  std::size_t tn = 0, tp = 0;
  for (const auto& img : fake_set) tn += classify(detector, img).label == Label::Fake;
  for (const auto& img : real_set) tp += classify(detector, img).label == Label::Real;
  return DetectionReport::from_counts(tn, tp, fake_set.size(), real_set.size());
}

nlohmann::json to_json(const DetectorModel& m) {
  return {{"format", "gan-forensics-detector"},
          {"version", 1},
          {"image_height", m.image_height},
          {"image_width", m.image_width},
          {"feature_mean", m.feature_mean},
          {"feature_scale", m.feature_scale},
          {"weights", m.weights},
          {"bias", m.bias},
          {"training_accuracy", m.training_accuracy},
          {"iterations", m.iterations}};
}

DetectorModel detector_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "gan-forensics-detector" || j.value("version", 0) != 1) {
    throw std::invalid_argument("not a version-1 gan-forensics detector file");
  }
  DetectorModel m;
  m.image_height = j.at("image_height").get<std::size_t>();
  m.image_width = j.at("image_width").get<std::size_t>();
  m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.training_accuracy = j.at("training_accuracy").get<double>();
  m.iterations = j.at("iterations").get<std::size_t>();
  m.validate();
  return m;
}

void save_detector(const DetectorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(model).dump(2) << '\n';
}

DetectorModel load_detector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read detector " + path.string());
  return detector_from_json(nlohmann::json::parse(in));
}

nlohmann::json to_json(const DetectionReport& r) {
  return {{"n_tn", r.n_tn}, {"n_tp", r.n_tp}, {"n_fn", r.n_fn}, {"n_fp", r.n_fp},
          {"n_qf", r.n_qf}, {"n_qr", r.n_qr}, {"acc", r.acc},   {"acc_fake", r.acc_fake}};
}

DetectionReport report_from_json(const nlohmann::json& j) {
  auto r = DetectionReport::from_counts(j.at("n_tn").get<std::size_t>(), j.at("n_tp").get<std::size_t>(),
                                        j.at("n_qf").get<std::size_t>(), j.at("n_qr").get<std::size_t>());
  if (j.at("n_fn").get<std::size_t>() != r.n_fn || j.at("n_fp").get<std::size_t>() != r.n_fp ||
      j.at("acc").get<double>() != r.acc || j.at("acc_fake").get<double>() != r.acc_fake) {
    throw std::invalid_argument("detection report fields are inconsistent with its counts");
  }
  return r;
}

std::string report_csv(const DetectionReport& r) {
  std::ostringstream os;
  os << "n_tn,n_tp,n_fn,n_fp,n_qf,n_qr,acc,acc_fake\n"
     << r.n_tn << ',' << r.n_tp << ',' << r.n_fn << ',' << r.n_fp << ',' << r.n_qf << ',' << r.n_qr << ','
     << format_double(r.acc) << ',' << format_double(r.acc_fake) << '\n';
  return os.str();
}

}  // namespace ganf
