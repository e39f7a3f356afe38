#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "certkit/core.hpp"
#include "certkit/random.hpp"

namespace certkit::testing {

/// Schema with real features f0..f{d-1} and the given roles switched on.
inline Schema make_schema(std::size_t dims, bool label = true, bool prediction = true, std::size_t num_classes = 2) {
  Schema s;
  for (std::size_t j = 0; j < dims; ++j) s.features.push_back({"f" + std::to_string(j), FeatureKind::real});
  s.has_label = label;
  s.has_prediction = prediction;
  s.num_classes = num_classes;
  return s;
}

inline LabeledSample make_row(std::vector<double> x, std::optional<ClassIndex> y = std::nullopt,
                              std::optional<ClassIndex> yhat = std::nullopt) {
  LabeledSample r;
  r.features = std::move(x);
  if (y) r.label = Target{*y};
  if (yhat) r.prediction = Target{*yhat};
  return r;
}

/// Binary classification set with exactly `correct` of `n` predictions right.
inline Dataset correctness_dataset(std::size_t n, std::size_t correct, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<LabeledSample> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const ClassIndex y = rng.bernoulli(0.5) ? 1 : 0;
    rows.push_back(make_row({rng.normal(), rng.normal()}, y, i < correct ? y : 1 - y));
  }
  return Dataset(make_schema(2), std::move(rows));
}

/// Isotropic Gaussian rows, labelled by the sign of the first coordinate.
inline Dataset gaussian_dataset(std::size_t n, std::vector<double> mean, std::uint64_t seed, bool labels = true) {
  Rng rng(seed);
  std::vector<LabeledSample> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(mean.size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = mean[j] + rng.normal();
    const ClassIndex y = x[0] > mean[0] ? 1 : 0;
    rows.push_back(labels ? make_row(std::move(x), y, y) : make_row(std::move(x)));
  }
  return Dataset(make_schema(mean.size(), labels, labels), std::move(rows));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("certkit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace certkit::testing

/// Asserts that `stmt` throws certkit::Error carrying `expected_code`.
#define EXPECT_CERTKIT_ERROR(stmt, expected_code)                                         \
  do {                                                                                   \
    try {                                                                                \
      stmt;                                                                              \
      ADD_FAILURE() << "expected " << ::certkit::to_string(expected_code) << ", nothing thrown"; \
    } catch (const ::certkit::Error& e_) {                                               \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                                  \
    }                                                                                    \
  } while (0)
