#pragma once

// Spectrum-feature fake-image detector (logistic regression over the 1D
// horizontal log spectrum) and the ACC / ACC(Fake) detection metrics.
//
// Real images are the positive class and fakes the negative class, so a
// correctly flagged fake is a true negative.

#include <cstddef>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "ganf/image.hpp"

namespace ganf {

struct DetectorConfig {
  double learning_rate = 0.5;
  std::size_t iterations = 500;
  double l2 = 1e-3;

  void validate() const;
};

struct DetectorModel {
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<double> weights;
  double bias = 0.0;
  double training_accuracy = 0.0;
  std::size_t iterations = 0;

  std::size_t feature_length() const { return weights.size(); }
  void validate() const;
};

enum class Label { Real, Fake };

const char* label_name(Label label);

struct Classification {
  Label label;
  double score;  // P(real)
};

// spectrum_1d of the image.
std::vector<double> spectral_features(const ImageBuffer& image);

// Full-batch gradient descent on the L2-regularized logistic loss, starting
// from zero weights, on features standardized with training-set statistics.
DetectorModel train_detector(const std::vector<ImageBuffer>& real_images,
                             const std::vector<ImageBuffer>& fake_images, const DetectorConfig& config);

// score = sigmoid(w . z + b); fake iff score < 0.5, so a tie labels real.
Classification classify(const DetectorModel& detector, const ImageBuffer& image);

struct DetectionReport {
  std::size_t n_tn = 0;  // fakes labelled fake
  std::size_t n_tp = 0;  // reals labelled real
  std::size_t n_fn = 0;  // reals labelled fake
  std::size_t n_fp = 0;  // fakes labelled real
  std::size_t n_qf = 0;  // fake queries
  std::size_t n_qr = 0;  // real queries
  double acc = 0.0;       // (n_tn + n_tp) / (n_qf + n_qr)
  double acc_fake = 0.0;  // n_tn / n_qf

  // Throws when the counts are inconsistent or there are no fake queries.
  static DetectionReport from_counts(std::size_t n_tn, std::size_t n_tp, std::size_t n_qf, std::size_t n_qr);
  bool operator==(const DetectionReport&) const = default;
};

DetectionReport evaluate(const DetectorModel& detector, const std::vector<ImageBuffer>& real_set,
                         const std::vector<ImageBuffer>& fake_set);

nlohmann::json to_json(const DetectorModel& model);
DetectorModel detector_from_json(const nlohmann::json& j);
void save_detector(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_detector(const std::filesystem::path& path);

// Fields: n_tn, n_tp, n_fn, n_fp, n_qf, n_qr, acc, acc_fake.
nlohmann::json to_json(const DetectionReport& report);
DetectionReport report_from_json(const nlohmann::json& j);
// Header line then one data row, columns in the JSON field order.
std::string report_csv(const DetectionReport& report);

}  // namespace ganf
