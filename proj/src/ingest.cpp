#include "hyperbrain/ingest.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "hyperbrain/error.hpp"
#include "hyperbrain/random.hpp"

namespace hyperbrain::ingest {

namespace {

constexpr char kMagic[4] = {'H', 'W', 'T', 'S'};

std::vector<std::string> default_labels(int r) {
  std::vector<std::string> labels;
  labels.reserve(r);
  for (int i = 0; i < r; ++i) labels.push_back("roi_" + std::to_string(i));
  return labels;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view cell, std::size_t line_no) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" +
                     std::string(cell) + "' as a real");
  }
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError("unexpected end of binary signal file");
  return value;
}

SignalMatrix load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  const std::size_t width = split_csv(line).size();
  if (width < 2) throw ParseError(path.string() + ": header has no timepoint columns");

  std::vector<std::string> labels;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != width) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " cells, found " + std::to_string(cells.size()));
    }
    labels.emplace_back(trim(cells[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) values.push_back(parse_real(cells[c], line_no));
  }

  SignalMatrix s;
  s.subject_id = path.stem().string();
  const auto rows = static_cast<Eigen::Index>(labels.size());
  const auto cols = static_cast<Eigen::Index>(width - 1);
  s.values = Eigen::Map<Matrix>(values.data(), rows, cols);
  s.roi_labels = std::move(labels);
  return s;
}

SignalMatrix load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ParseError(path.string() + ": bad magic");
  const auto r = read_le<std::uint32_t>(in);
  const auto t = read_le<std::uint32_t>(in);
  SignalMatrix s;
  s.subject_id = path.stem().string();
  s.values.resize(r, t);
  for (std::uint32_t i = 0; i < r; ++i)
    for (std::uint32_t j = 0; j < t; ++j) s.values(i, j) = read_le<double>(in);
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(path.string() + ": trailing bytes");
  s.roi_labels = default_labels(static_cast<int>(r));
  return s;
}

}  // namespace

void validate(const SignalMatrix& s) {
  if (s.values.rows() < 2 || s.values.cols() < 2) {
    throw DataError("signal matrix must be at least 2x2, got " + std::to_string(s.values.rows()) +
                    "x" + std::to_string(s.values.cols()));
  }
  if (!s.values.allFinite()) throw DataError("signal matrix '" + s.subject_id + "' has non-finite entries");
  if (static_cast<Eigen::Index>(s.roi_labels.size()) != s.values.rows()) {
    throw DataError("roi_labels length does not match row count");
  }
}

void validate_cohort(const std::vector<SignalMatrix>& cohort) {
  for (const auto& s : cohort) {
    validate(s);
    if (s.values.rows() != cohort.front().values.rows() || s.roi_labels != cohort.front().roi_labels) {
      throw DataError("subject '" + s.subject_id + "' does not share the cohort's ROI set");
    }
  }
}

Format format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return Format::Csv;
  if (ext == ".bin" || ext == ".hwts") return Format::Binary;
  throw ConfigError("unknown signal file extension '" + ext + "'");
}

SignalMatrix load_signals(const std::filesystem::path& path, Format format) {
  SignalMatrix s = format == Format::Csv ? load_csv(path) : load_binary(path);
  validate(s);
  return s;
}

void save_signals(const SignalMatrix& s, const std::filesystem::path& path, Format format) {
  if (format == Format::Binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kMagic, 4);
    write_le(out, static_cast<std::uint32_t>(s.values.rows()));
    write_le(out, static_cast<std::uint32_t>(s.values.cols()));
    for (Eigen::Index i = 0; i < s.values.rows(); ++i)
      for (Eigen::Index j = 0; j < s.values.cols(); ++j) write_le(out, s.values(i, j));
    return;
  }

  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "roi";
  for (Eigen::Index j = 0; j < s.values.cols(); ++j) out << ',' << j;
  out << '\n';
  char num[32];
  for (Eigen::Index i = 0; i < s.values.rows(); ++i) {
    out << s.roi_labels[i];
    for (Eigen::Index j = 0; j < s.values.cols(); ++j) {
      const auto [end, ec] = std::to_chars(num, num + sizeof(num), s.values(i, j));
      out << ',' << std::string_view(num, end - num);
    }
    out << '\n';
  }
}

void CohortSpec::validate() const {
  if (n_subjects < 1) throw ConfigError("n_subjects must be >= 1");
  if (n_rois < 2) throw ConfigError("n_rois must be >= 2");
  if (n_timepoints < 2) throw ConfigError("n_timepoints must be >= 2");
  if (n_communities < 1 || n_communities > n_rois) throw ConfigError("n_communities must be in [1, n_rois]");
  if (n_rois / n_communities < 2) throw ConfigError("each community needs at least 2 ROIs");
  if (!(community_strength >= 0.0 && community_strength <= 1.0))
    throw ConfigError("community_strength must be in [0, 1]");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
  if (!(anomaly_fraction >= 0.0 && anomaly_fraction < 1.0))
    throw ConfigError("anomaly_fraction must be in [0, 1)");
  if (anomaly_window < 1) throw ConfigError("anomaly_window must be >= 1");
}

std::vector<int> community_assignment(int n_rois, int n_communities) {
  std::vector<int> community(n_rois);
  for (int r = 0; r < n_rois; ++r) community[r] = static_cast<int>(static_cast<long>(r) * n_communities / n_rois);
  return community;
}

SignalMatrix generate_subject(const CohortSpec& spec, int subject_index) {
  Rng rng(spec.seed + static_cast<std::uint64_t>(subject_index));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int r_count = spec.n_rois;
  const int t_count = spec.n_timepoints;
  const auto community = community_assignment(r_count, spec.n_communities);

  Matrix latent(spec.n_communities, t_count);
  for (int c = 0; c < spec.n_communities; ++c)
    for (int t = 0; t < t_count; ++t) latent(c, t) = normal(rng);

  // Per-block membership; identical to `community` unless an anomalous
  // reassignment is drawn for that block.
  const int n_blocks = (t_count + spec.anomaly_window - 1) / spec.anomaly_window;
  std::vector<std::vector<int>> membership(n_blocks, community);
  if (spec.anomaly_fraction > 0.0 && spec.n_communities > 1) {
    for (auto& block : membership) {
      if (uniform01(rng) >= spec.anomaly_fraction) continue;
      const auto roi = static_cast<int>(uniform_index(rng, r_count));
      const auto shift = 1 + static_cast<int>(uniform_index(rng, spec.n_communities - 1));
      block[roi] = (block[roi] + shift) % spec.n_communities;
    }
  }

  SignalMatrix s;
  s.subject_id = "subject_" + std::to_string(subject_index);
  s.values.resize(r_count, t_count);
  for (int r = 0; r < r_count; ++r) {
    for (int t = 0; t < t_count; ++t) {
      const int c = membership[t / spec.anomaly_window][r];
      s.values(r, t) = spec.community_strength * latent(c, t) + spec.noise_sigma * normal(rng);
    }
  }
  s.roi_labels = default_labels(r_count);
  return s;
}

std::vector<SignalMatrix> generate_cohort(const CohortSpec& spec) {
  spec.validate();
  std::vector<SignalMatrix> cohort;
  cohort.reserve(spec.n_subjects);
  for (int i = 0; i < spec.n_subjects; ++i) cohort.push_back(generate_subject(spec, i));
  return cohort;
}

}  // namespace hyperbrain::ingest
