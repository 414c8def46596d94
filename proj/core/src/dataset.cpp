#include "pglearn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "pglearn/error.hpp"
#include "pglearn/rng.hpp"

namespace pglearn {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Comma-separated fields; double quotes group a field and "" escapes a quote.
std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.emplace_back(trim(cur));
    return fields;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

bool is_unlabeled_cell(std::string_view s) {
    s = trim(s);
    return s.empty() || s == "?";
}

std::vector<Index> sorted(std::vector<Index> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

bool Dataset::fully_labeled() const {
    return std::none_of(labels.begin(), labels.end(), [](int l) { return l == kUnlabeled; });
}

void Dataset::validate() const {
    if (n() < 2) throw Error("too_few_points", "dataset needs at least 2 points");
    if (d() < 1) throw Error("no_features", "dataset needs at least 1 feature");
    if (c() < 2) throw Error("too_few_classes", "dataset needs at least 2 distinct classes");
    if (static_cast<Index>(labels.size()) != n())
        throw Error("shape_mismatch", "label vector length does not match point count");
    if (!features.allFinite()) throw Error("non_finite_feature", "non-finite feature value");
    for (const int l : labels) {
        if (l != kUnlabeled && (l < 0 || l >= c()))
            throw Error("bad_label", "label index out of range");
    }
    if (!noise_columns.empty() && static_cast<Index>(noise_columns.size()) != d())
        throw Error("shape_mismatch", "noise column mask does not match dimensionality");
}

Dataset parse_dataset(std::istream &in, const CsvOptions &options) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw Error("parse_error", "empty CSV input");

    const std::size_t width = rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width)
            throw Error("parse_error", "row " + std::to_string(r + 1) + " has " +
                                           std::to_string(rows[r].size()) + " fields, expected " +
                                           std::to_string(width));
    }
    if (width < 2) throw Error("parse_error", "need at least one feature column and a label column");

    bool header = false;
    std::size_t label_col = 0;
    if (const auto *name = std::get_if<std::string>(&options.label_column)) {
        header = options.has_header.value_or(true);
        if (!header) throw Error("parse_error", "label column given by name but CSV has no header");
        const auto &head = rows.front();
        const auto it = std::find(head.begin(), head.end(), *name);
        if (it == head.end()) throw Error("parse_error", "label column '" + *name + "' not found in header");
        label_col = static_cast<std::size_t>(it - head.begin());
    } else {
        label_col = std::get<std::size_t>(options.label_column);
        if (label_col >= width) throw Error("parse_error", "label column position out of range");
        if (options.has_header) {
            header = *options.has_header;
        } else {
            const auto &first = rows.front();
            for (std::size_t c = 0; c < width; ++c) {
                if (c != label_col && !parse_number(first[c])) header = true;
            }
        }
    }

    const std::size_t first_data = header ? 1 : 0;
    const auto n = static_cast<Index>(rows.size() - first_data);
    const auto d = static_cast<Index>(width - 1);

    Dataset ds;
    ds.features.resize(n, d);
    ds.labels.assign(static_cast<std::size_t>(n), kUnlabeled);
    ds.noise_columns.assign(static_cast<std::size_t>(d), false);
    for (std::size_t c = 0; c < width; ++c) {
        if (c == label_col) continue;
        ds.feature_names.push_back(header ? rows.front()[c] : "x" + std::to_string(ds.feature_names.size()));
    }

    std::unordered_map<std::string, int> class_of;
    for (Index i = 0; i < n; ++i) {
        const auto &row = rows[first_data + static_cast<std::size_t>(i)];
        Index col = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) continue;
            const auto value = parse_number(row[c]);
            if (!value)
                throw Error("non_numeric_feature", "non-numeric feature '" + row[c] + "' at data row " +
                                                       std::to_string(i + 1));
            if (!std::isfinite(*value))
                throw Error("non_finite_feature", "non-finite feature at data row " + std::to_string(i + 1));
            ds.features(i, col++) = *value;
        }
        const std::string &cell = row[label_col];
        if (is_unlabeled_cell(cell)) continue;
        const std::string key(trim(cell));
        auto [it, inserted] = class_of.try_emplace(key, static_cast<int>(ds.class_names.size()));
        if (inserted) ds.class_names.push_back(key);
        ds.labels[static_cast<std::size_t>(i)] = it->second;
    }
    if (ds.c() < 2)
        throw Error("too_few_classes", "fewer than 2 distinct classes among labeled rows");
    ds.validate();
    return ds;
}

Dataset load_dataset(const std::filesystem::path &path, const CsvOptions &options) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open dataset '" + path.string() + "'");
    return parse_dataset(in, options);
}

void write_dataset(std::ostream &out, const Dataset &dataset) {
    for (Index m = 0; m < dataset.d(); ++m) {
        const auto idx = static_cast<std::size_t>(m);
        out << (idx < dataset.feature_names.size() ? dataset.feature_names[idx] : "x" + std::to_string(m)) << ',';
    }
    out << "label\n";
    out << std::setprecision(17);
    for (Index i = 0; i < dataset.n(); ++i) {
        for (Index m = 0; m < dataset.d(); ++m) out << dataset.features(i, m) << ',';
        const int l = dataset.labels[static_cast<std::size_t>(i)];
        if (l != kUnlabeled) out << dataset.class_names[static_cast<std::size_t>(l)];
        out << '\n';
    }
}

void write_dataset(const std::filesystem::path &path, const Dataset &dataset) {
    std::ofstream out(path);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    write_dataset(out, dataset);
}

std::vector<Index> SplitSpec::sources() const {
    std::vector<Index> out;
    std::set_difference(labeled.begin(), labeled.end(), validation.begin(), validation.end(),
                        std::back_inserter(out));
    return out;
}

void SplitSpec::validate(const Dataset &dataset) const {
    const Index n = dataset.n();
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    auto mark = [&](const std::vector<Index> &set, const char *name) {
        for (const Index i : set) {
            if (i < 0 || i >= n)
                throw Error("inconsistent_split", std::string(name) + " index " + std::to_string(i) +
                                                      " out of range for n=" + std::to_string(n));
            if (++seen[static_cast<std::size_t>(i)] > 1)
                throw Error("inconsistent_split", "index " + std::to_string(i) + " appears twice");
        }
    };
    mark(labeled, "labeled");
    mark(unlabeled, "unlabeled");
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw Error("inconsistent_split", "labeled and unlabeled sets do not cover all points");
    if (!std::is_sorted(labeled.begin(), labeled.end()) || !std::is_sorted(validation.begin(), validation.end()))
        throw Error("inconsistent_split", "index sets must be sorted");
    if (!std::includes(labeled.begin(), labeled.end(), validation.begin(), validation.end()))
        throw Error("inconsistent_split", "validation set is not a subset of the labeled set");

    std::vector<bool> covered(static_cast<std::size_t>(dataset.c()), false);
    for (const Index i : labeled) {
        const int l = dataset.labels[static_cast<std::size_t>(i)];
        if (l == kUnlabeled) throw Error("inconsistent_split", "labeled index " + std::to_string(i) + " has no label");
        covered[static_cast<std::size_t>(l)] = true;
    }
    if (std::find(covered.begin(), covered.end(), false) != covered.end())
        throw Error("inconsistent_split", "not every class is present in the labeled set");
}

SplitSpec sample_split(const Dataset &dataset, double labeled_fraction,
                       double validation_fraction_of_labeled, std::uint64_t seed) {
    if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0))
        throw Error("bad_argument", "labeled_fraction must lie in (0,1)");
    if (!(validation_fraction_of_labeled > 0.0 && validation_fraction_of_labeled < 1.0))
        throw Error("bad_argument", "validation_fraction_of_labeled must lie in (0,1)");
    if (!dataset.fully_labeled())
        throw Error("bad_argument", "sample_split needs a true label for every point");

    const Index n = dataset.n();
    const int c = dataset.c();
    const auto l = static_cast<Index>(std::ceil(labeled_fraction * static_cast<double>(n) - 1e-12));
    if (l < c)
        throw Error("infeasible_split", "labeled set of size " + std::to_string(l) + " cannot cover " +
                                            std::to_string(c) + " classes");
    if (l >= n) throw Error("infeasible_split", "labeled fraction leaves no unlabeled points");

    Rng rng(seed);
    auto label_of = [&](Index i) { return dataset.labels[static_cast<std::size_t>(i)]; };
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});

    // Uniform draw conditioned on class coverage via rejection; a constructive
    // fallback (one random member per class, then uniform fill) for skewed sets.
    std::vector<Index> labeled;
    auto covers = [&](const std::vector<Index> &set) {
        std::vector<bool> hit(static_cast<std::size_t>(c), false);
        for (const Index i : set) hit[static_cast<std::size_t>(label_of(i))] = true;
        return std::find(hit.begin(), hit.end(), false) == hit.end();
    };
    for (int attempt = 0; attempt < 200 && labeled.empty(); ++attempt) {
        std::vector<Index> perm = all;
        std::shuffle(perm.begin(), perm.end(), rng);
        perm.resize(static_cast<std::size_t>(l));
        if (covers(perm)) labeled = std::move(perm);
    }
    if (labeled.empty()) {
        std::vector<Index> perm = all;
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<bool> hit(static_cast<std::size_t>(c), false);
        std::vector<bool> taken(static_cast<std::size_t>(n), false);
        for (const Index i : perm) {
            if (!hit[static_cast<std::size_t>(label_of(i))]) {
                hit[static_cast<std::size_t>(label_of(i))] = true;
                taken[static_cast<std::size_t>(i)] = true;
                labeled.push_back(i);
            }
        }
        for (const Index i : perm) {
            if (static_cast<Index>(labeled.size()) == l) break;
            if (!taken[static_cast<std::size_t>(i)]) labeled.push_back(i);
        }
    }

    // Validation: one member of every class that has at least two labeled
    // points, then a uniform fill. A point is only moved into V while its
    // class keeps at least one diffusion source, and at least one source
    // overall always remains.
    std::vector<Index> counts(static_cast<std::size_t>(c), 0);
    for (const Index i : labeled) ++counts[static_cast<std::size_t>(label_of(i))];
    const auto observed = static_cast<Index>(std::count_if(counts.begin(), counts.end(), [](Index k) { return k > 0; }));
    const auto wanted = std::max<Index>(
        observed, static_cast<Index>(std::ceil(validation_fraction_of_labeled * static_cast<double>(l) - 1e-12)));
    const Index target = std::min<Index>(wanted, l - 1);

    std::vector<Index> order = labeled;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Index> remaining = counts;
    std::vector<bool> in_val(static_cast<std::size_t>(n), false);
    std::vector<Index> validation;
    auto try_take = [&](Index i) {
        auto &left = remaining[static_cast<std::size_t>(label_of(i))];
        if (in_val[static_cast<std::size_t>(i)] || left < 2) return;
        in_val[static_cast<std::size_t>(i)] = true;
        --left;
        validation.push_back(i);
    };
    std::vector<bool> represented(static_cast<std::size_t>(c), false);
    for (const Index i : order) {
        if (static_cast<Index>(validation.size()) >= target) break;
        if (represented[static_cast<std::size_t>(label_of(i))]) continue;
        const auto before = validation.size();
        try_take(i);
        if (validation.size() > before) represented[static_cast<std::size_t>(label_of(i))] = true;
    }
    for (const Index i : order) {
        if (static_cast<Index>(validation.size()) >= target) break;
        try_take(i);
    }

    SplitSpec split;
    split.labeled = sorted(std::move(labeled));
    split.validation = sorted(std::move(validation));
    std::vector<bool> is_labeled(static_cast<std::size_t>(n), false);
    for (const Index i : split.labeled) is_labeled[static_cast<std::size_t>(i)] = true;
    for (Index i = 0; i < n; ++i)
        if (!is_labeled[static_cast<std::size_t>(i)]) split.unlabeled.push_back(i);
    return split;
}

std::string split_to_json(const SplitSpec &split) {
    nlohmann::json j;
    j["labeled"] = split.labeled;
    j["validation"] = split.validation;
    j["unlabeled"] = split.unlabeled;
    return j.dump();
}

SplitSpec split_from_json(const std::string &text) {
    try {
        const auto j = nlohmann::json::parse(text);
        SplitSpec split;
        split.labeled = sorted(j.at("labeled").get<std::vector<Index>>());
        split.validation = sorted(j.at("validation").get<std::vector<Index>>());
        split.unlabeled = sorted(j.at("unlabeled").get<std::vector<Index>>());
        return split;
    } catch (const nlohmann::json::exception &e) {
        throw Error("parse_error", std::string("malformed split JSON: ") + e.what());
    }
}

namespace {
std::string slurp(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

void write_split(const std::filesystem::path &path, const SplitSpec &split) {
    std::ofstream out(path);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out << split_to_json(split) << '\n';
}

SplitSpec read_split(const std::filesystem::path &path) { return split_from_json(slurp(path)); }

Dataset inject_noise_features(const Dataset &dataset, double noise_fraction, std::uint64_t seed) {
    if (!(noise_fraction > 0.0)) throw Error("bad_argument", "noise_fraction must be positive");
    const Index d = dataset.d();
    const auto extra = static_cast<Index>(std::ceil(noise_fraction * static_cast<double>(d) - 1e-12));

    Dataset out = dataset;
    out.features.resize(dataset.n(), d + extra);
    out.features.leftCols(d) = dataset.features;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // column-major fill keeps each noise column a contiguous draw
    for (Index m = d; m < d + extra; ++m)
        for (Index i = 0; i < dataset.n(); ++i) out.features(i, m) = normal(rng);

    out.noise_columns = dataset.noise_columns;
    out.noise_columns.resize(static_cast<std::size_t>(d), false);
    out.noise_columns.resize(static_cast<std::size_t>(d + extra), true);
    out.feature_names = dataset.feature_names;
    out.feature_names.resize(static_cast<std::size_t>(d));
    for (Index m = 0; m < d; ++m)
        if (out.feature_names[static_cast<std::size_t>(m)].empty())
            out.feature_names[static_cast<std::size_t>(m)] = "x" + std::to_string(m);
    for (Index m = 0; m < extra; ++m) out.feature_names.push_back("noise" + std::to_string(m));
    return out;
}

std::string noise_metadata_json(const Dataset &dataset) {
    nlohmann::json j;
    std::vector<Index> noise;
    for (std::size_t m = 0; m < dataset.noise_columns.size(); ++m)
        if (dataset.noise_columns[m]) noise.push_back(static_cast<Index>(m));
    j["dimensions"] = dataset.d();
    j["original_dimensions"] = dataset.d() - static_cast<Index>(noise.size());
    j["noise_columns"] = noise;
    return j.dump(2);
}

std::vector<bool> noise_columns_from_json(const std::string &text) {
    try {
        const auto j = nlohmann::json::parse(text);
        const auto d = j.at("dimensions").get<Index>();
        std::vector<bool> mask(static_cast<std::size_t>(d), false);
        for (const Index m : j.at("noise_columns").get<std::vector<Index>>()) {
            if (m < 0 || m >= d) throw Error("parse_error", "noise column index out of range");
            mask[static_cast<std::size_t>(m)] = true;
        }
        return mask;
    } catch (const nlohmann::json::exception &e) {
        throw Error("parse_error", std::string("malformed noise metadata: ") + e.what());
    }
}

Eigen::MatrixXd build_label_matrix(const Dataset &dataset, const SplitSpec &split, bool include_validation) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(dataset.n(), dataset.c());
    const auto &rows = include_validation ? split.labeled : split.sources();
    for (const Index i : rows) {
        const int l = dataset.labels[static_cast<std::size_t>(i)];
        if (l != kUnlabeled) y(i, l) = 1.0;
    }
    return y;
}

Dataset make_blobs(const BlobsSpec &spec, std::uint64_t seed) {
    if (spec.points < 2 || spec.classes < 2 || spec.informative_dims < 1)
        throw Error("bad_argument", "blobs need >= 2 points, >= 2 classes, >= 1 dimension");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd centers(spec.classes, spec.informative_dims);
    for (Index k = 0; k < centers.rows(); ++k)
        for (Index m = 0; m < centers.cols(); ++m) centers(k, m) = spec.center_spread * normal(rng);

    Dataset ds;
    ds.features.resize(spec.points, spec.informative_dims);
    ds.labels.resize(static_cast<std::size_t>(spec.points));
    for (Index i = 0; i < spec.points; ++i) {
        const int k = static_cast<int>(i % spec.classes);
        ds.labels[static_cast<std::size_t>(i)] = k;
        for (Index m = 0; m < spec.informative_dims; ++m) ds.features(i, m) = centers(k, m) + normal(rng);
    }
    for (int k = 0; k < spec.classes; ++k) ds.class_names.push_back("c" + std::to_string(k));
    for (Index m = 0; m < spec.informative_dims; ++m) ds.feature_names.push_back("x" + std::to_string(m));
    ds.noise_columns.assign(static_cast<std::size_t>(spec.informative_dims), false);
    return ds;
}

}  // namespace pglearn
