#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace pglearn {

using Index = Eigen::Index;

/// Class labels are stored 0-based internally; kUnlabeled marks points
/// without a label. Original label strings are kept in Dataset::class_names
/// (class i is the i-th distinct label in first-appearance order).
inline constexpr int kUnlabeled = -1;

/// Point cloud with optional labels.
///
/// Invariants: n >= 2, d >= 1, c >= 2, all features finite, every stored
/// label lies in [0, c).
struct Dataset {
    Eigen::MatrixXd features;             // n x d, one row per point
    std::vector<int> labels;              // size n; kUnlabeled or [0, c)
    std::vector<std::string> class_names; // size c
    std::vector<std::string> feature_names;
    /// true for columns appended by inject_noise_features
    std::vector<bool> noise_columns;

    [[nodiscard]] Index n() const { return features.rows(); }
    [[nodiscard]] Index d() const { return features.cols(); }
    [[nodiscard]] int c() const { return static_cast<int>(class_names.size()); }
    [[nodiscard]] bool fully_labeled() const;

    /// Throws pglearn::Error if any invariant is violated.
    void validate() const;
};

/// Label column selected by header name or by 0-based position.
using LabelColumn = std::variant<std::string, std::size_t>;

struct CsvOptions {
    LabelColumn label_column = std::size_t{0};
    /// nullopt: a header is assumed when the label column is given by name,
    /// otherwise when any feature cell of the first row is non-numeric.
    std::optional<bool> has_header;
};

Dataset load_dataset(const std::filesystem::path &path, const CsvOptions &options);
Dataset parse_dataset(std::istream &in, const CsvOptions &options);

/// Writes features followed by a trailing "label" column, with a header row.
/// Unlabeled points get an empty label cell.
void write_dataset(const std::filesystem::path &path, const Dataset &dataset);
void write_dataset(std::ostream &out, const Dataset &dataset);

/// Index sets over 0..n-1. labeled and unlabeled partition the points,
/// validation is a subset of labeled. Indices are kept sorted.
struct SplitSpec {
    std::vector<Index> labeled;
    std::vector<Index> validation;
    std::vector<Index> unlabeled;

    /// labeled minus validation: the points that seed diffusion during search.
    [[nodiscard]] std::vector<Index> sources() const;

    /// Checks the partition/subset invariants against a dataset of n points,
    /// and class coverage of the labeled set when labels are available.
    void validate(const Dataset &dataset) const;

    bool operator==(const SplitSpec &) const = default;
};

inline constexpr double kDefaultValidationFraction = 0.5;

/// Samples |L| = ceil(labeled_fraction * n) points uniformly at random such
/// that every class appears in L, then carves the validation set out of L.
/// Deterministic for a fixed seed. Requires a fully labeled dataset.
SplitSpec sample_split(const Dataset &dataset, double labeled_fraction,
                       double validation_fraction_of_labeled, std::uint64_t seed);

std::string split_to_json(const SplitSpec &split);
SplitSpec split_from_json(const std::string &text);
void write_split(const std::filesystem::path &path, const SplitSpec &split);
SplitSpec read_split(const std::filesystem::path &path);

/// Appends ceil(noise_fraction * d) i.i.d. N(0,1) columns. Original columns
/// are copied unchanged and the new ones are flagged in noise_columns.
Dataset inject_noise_features(const Dataset &dataset, double noise_fraction,
                              std::uint64_t seed);

/// JSON sidecar describing which feature columns are injected noise.
std::string noise_metadata_json(const Dataset &dataset);
std::vector<bool> noise_columns_from_json(const std::string &text);

/// n x c one-hot matrix. Rows of L \ V carry their label; validation rows
/// only when include_validation is set; every other row is zero.
Eigen::MatrixXd build_label_matrix(const Dataset &dataset, const SplitSpec &split,
                                   bool include_validation);

/// Isotropic Gaussian blobs: `informative_dims` dimensions carry the class
/// signal (class centers drawn with the given spread, unit within-class
/// variance). Used as a synthetic fixture by tests, benchmarks and the CLI.
struct BlobsSpec {
    Index points = 300;
    int classes = 4;
    Index informative_dims = 4;
    double center_spread = 2.0;
};
Dataset make_blobs(const BlobsSpec &spec, std::uint64_t seed);

}  // namespace pglearn
