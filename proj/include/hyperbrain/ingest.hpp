#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hyperbrain::ingest {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One subject's multivariate time series: rows are ROIs, columns timepoints.
struct SignalMatrix {
  std::string subject_id;
  Matrix values;
  std::vector<std::string> roi_labels;

  int n_rois() const { return static_cast<int>(values.rows()); }
  int n_timepoints() const { return static_cast<int>(values.cols()); }
};

/// Throws DataError unless R >= 2, T >= 2, all values finite and the label
/// count matches R.
void validate(const SignalMatrix& s);

/// Throws DataError if subjects disagree on R or on ROI labels.
void validate_cohort(const std::vector<SignalMatrix>& cohort);

enum class Format { Csv, Binary };

Format format_from_path(const std::filesystem::path& path);

SignalMatrix load_signals(const std::filesystem::path& path, Format format);
void save_signals(const SignalMatrix& s, const std::filesystem::path& path, Format format);

struct CohortSpec {
  int n_subjects = 13;
  int n_rois = 30;
  int n_timepoints = 400;
  int n_communities = 3;
  double community_strength = 0.9;
  double noise_sigma = 0.3;
  // Per (subject, window) probability that one ROI follows a foreign
  // community's latent signal for that window.
  double anomaly_fraction = 0.0;
  // Window length the latent switching uses; only relevant when
  // anomaly_fraction > 0.
  int anomaly_window = 40;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Community of each ROI: contiguous, near-equal blocks.
std::vector<int> community_assignment(int n_rois, int n_communities);

std::vector<SignalMatrix> generate_cohort(const CohortSpec& spec);

/// Signal for a single subject; generate_cohort calls this with
/// seed + subject index.
SignalMatrix generate_subject(const CohortSpec& spec, int subject_index);

}  // namespace hyperbrain::ingest
