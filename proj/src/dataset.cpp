#include "conclusive_forest/dataset.hpp"

#include "conclusive_forest/errors.hpp"
#include "conclusive_forest/model_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

namespace cforest {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.emplace_back(trim(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    if (quoted) throw SchemaError("unterminated quote in CSV line");
    cells.emplace_back(trim(cell));
    return cells;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Dataset parse_csv(std::string_view text, std::string_view target_column) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = trim(text.substr(pos, end - pos));
        if (!line.empty()) rows.push_back(split_line(line));
        pos = end + 1;
    }
    if (rows.empty()) throw SchemaError("CSV has no header");

    Dataset data;
    const std::vector<std::string>& header = rows.front();
    int target_col = -1;
    std::set<std::string> seen;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].empty()) throw SchemaError("CSV header has an empty column name");
        if (!seen.insert(header[c]).second) throw SchemaError("duplicate CSV column '" + header[c] + "'");
        if (header[c] == target_column) {
            target_col = static_cast<int>(c);
            data.target_name = header[c];
        } else {
            data.feature_names.push_back(header[c]);
        }
    }
    const auto n = static_cast<Eigen::Index>(rows.size() - 1);
    data.features.resize(n, static_cast<Eigen::Index>(data.feature_names.size()));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.size() != header.size())
            throw SchemaError("CSV row " + std::to_string(r) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(header.size()));
        Eigen::Index col = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (static_cast<int>(c) == target_col) {
                data.targets.push_back(cells[c]);
                continue;
            }
            const auto v = parse_number(cells[c]);
            if (!v || !std::isfinite(*v))
                throw SchemaError("CSV row " + std::to_string(r) + " column '" + header[c] +
                                  "' is not a finite number: '" + cells[c] + "'");
            data.features(static_cast<Eigen::Index>(r - 1), col++) = *v;
        }
    }
    return data;
}

Dataset read_csv(const std::filesystem::path& path, std::string_view target_column) {
    return parse_csv(read_file(path), target_column);
}

std::string to_csv(const Dataset& data) {
    std::string out;
    for (std::size_t c = 0; c < data.feature_names.size(); ++c) {
        if (c) out += ',';
        out += quote_if_needed(data.feature_names[c]);
    }
    if (data.has_targets()) out += (data.feature_names.empty() ? "" : ",") + quote_if_needed(data.target_name);
    out += '\n';
    for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
            if (c) out += ',';
            out += format_number(data.features(r, c));
        }
        if (data.has_targets())
            out += (data.features.cols() ? "," : "") + quote_if_needed(data.targets[static_cast<std::size_t>(r)]);
        out += '\n';
    }
    return out;
}

std::vector<std::string> infer_classes(const std::vector<std::string>& targets) {
    const std::set<std::string> distinct(targets.begin(), targets.end());
    std::vector<std::string> classes(distinct.begin(), distinct.end());
    const bool numeric = std::all_of(classes.begin(), classes.end(), [](const auto& s) { return parse_number(s); });
    if (numeric)
        std::stable_sort(classes.begin(), classes.end(),
                         [](const auto& a, const auto& b) { return *parse_number(a) < *parse_number(b); });
    return classes;
}

Eigen::VectorXd class_indices(const std::vector<std::string>& targets, const std::vector<std::string>& classes) {
    std::unordered_map<std::string, int> index;
    for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], static_cast<int>(i));
    Eigen::VectorXd out(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto it = index.find(targets[i]);
        if (it == index.end()) throw SchemaError("unknown class label '" + targets[i] + "'");
        out[static_cast<Eigen::Index>(i)] = it->second;
    }
    return out;
}

Eigen::VectorXd numeric_targets(const std::vector<std::string>& targets) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto v = parse_number(targets[i]);
        if (!v || !std::isfinite(*v)) throw SchemaError("target '" + targets[i] + "' is not a finite number");
        out[static_cast<Eigen::Index>(i)] = *v;
    }
    return out;
}

Eigen::VectorXd encode_targets(const Dataset& data, const ForestModel& model) {
    if (!data.has_targets()) throw SchemaError("dataset has no '" + data.target_name + "' column");
    return is_classification(model.task()) ? class_indices(data.targets, model.classes())
                                           : numeric_targets(data.targets);
}

FeatureMatrix align_to_model(const Dataset& data, const ForestModel& model) {
    std::unordered_map<std::string, Eigen::Index> column;
    for (std::size_t c = 0; c < data.feature_names.size(); ++c)
        column.emplace(data.feature_names[c], static_cast<Eigen::Index>(c));
    FeatureMatrix out(data.features.rows(), static_cast<Eigen::Index>(model.num_features()));
    for (const FeatureSpec& spec : model.features()) {
        const auto it = column.find(spec.name);
        if (it == column.end()) throw SchemaError("dataset lacks model feature '" + spec.name + "'");
        out.col(spec.id) = data.features.col(it->second);
    }
    return out;
}

std::vector<FeatureSpec> infer_feature_specs(const std::vector<std::string>& names, const FeatureMatrix& features) {
    if (static_cast<Eigen::Index>(names.size()) != features.cols())
        throw SchemaError("feature name count differs from column count");
    std::vector<FeatureSpec> specs;
    for (std::size_t c = 0; c < names.size(); ++c) {
        FeatureSpec spec;
        spec.id = static_cast<int>(c);
        spec.name = names[c];
        const auto col = features.col(static_cast<Eigen::Index>(c));
        spec.domain_min = features.rows() ? col.minCoeff() : 0.0;
        spec.domain_max = features.rows() ? col.maxCoeff() : 0.0;
        const auto eq = names[c].find('=');
        if (eq != std::string::npos && eq > 0 && eq + 1 < names[c].size()) {
            spec.kind = FeatureKind::one_hot_member;
            spec.group = names[c].substr(0, eq);
            spec.member_value = names[c].substr(eq + 1);
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.feature_names = data.feature_names;
    out.target_name = data.target_name;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= data.rows()) throw SchemaError("row index out of range");
        out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(rows[i]));
        if (data.has_targets()) out.targets.push_back(data.targets[rows[i]]);
    }
    return out;
}

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must be in [0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
    SplitIndices out;
    out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

namespace {

// dividing by an exact power of ten lands on the nearest double to the decimal
double round_to(double v, double step) {
    const double scale = std::round(1.0 / step);
    return std::round(v * scale) / scale;
}

}  // namespace

Dataset make_banknote_like(std::uint64_t seed) {
    constexpr Eigen::Index n = 1372;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Dataset d;
    d.feature_names = {"variance", "skewness", "curtosis", "entropy"};
    d.target_name = "target";
    d.features.resize(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double variance = 0.43 + 2.8 * z(rng);
        const double curtosis = 1.4 + 4.3 * z(rng);
        const double skewness = 1.9 + 1.1 * variance + 4.5 * z(rng);
        const double entropy = std::min(2.4, -1.2 + 2.1 * z(rng));
        const double score = variance + 0.3 * curtosis + 0.35 * z(rng);
        d.features.row(i) << round_to(variance, 1e-5), round_to(skewness, 1e-5), round_to(curtosis, 1e-5),
            round_to(entropy, 1e-5);
        d.targets.push_back(score < 0.9 ? "1" : "0");
    }
    return d;
}

Dataset make_glass_like(std::uint64_t seed) {
    const std::vector<std::pair<std::string, int>> classes{{"1", 70}, {"2", 76}, {"3", 17},
                                                           {"5", 13}, {"6", 9},  {"7", 29}};
    // per-class centre of each oxide column
    const double centre[6][9] = {
        {1.5187, 13.2, 3.55, 1.16, 72.6, 0.45, 8.8, 0.01, 0.06},
        {1.5186, 13.1, 3.00, 1.41, 72.6, 0.52, 9.1, 0.05, 0.08},
        {1.5180, 13.4, 3.54, 1.20, 72.4, 0.41, 8.8, 0.01, 0.06},
        {1.5190, 12.8, 0.77, 2.03, 72.4, 1.47, 10.1, 0.19, 0.06},
        {1.5175, 14.6, 1.31, 1.37, 73.2, 0.00, 9.4, 0.00, 0.00},
        {1.5171, 14.4, 0.54, 2.12, 72.9, 0.33, 8.5, 1.04, 0.01},
    };
    const double spread[9] = {0.002, 0.5, 0.6, 0.3, 0.6, 0.3, 0.9, 0.3, 0.05};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Dataset d;
    d.feature_names = {"RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe"};
    d.features.resize(214, 9);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (int i = 0; i < classes[c].second; ++i, ++row) {
            for (int f = 0; f < 9; ++f) {
                double v = centre[c][f] + spread[f] * z(rng);
                if (f > 0) v = std::max(0.0, v);
                d.features(row, f) = round_to(v, f == 0 ? 1e-5 : 1e-2);
            }
            d.targets.push_back(classes[c].first);
        }
    }
    return d;
}

Dataset make_wine_like(std::uint64_t seed) {
    constexpr Eigen::Index n = 4898;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Dataset d;
    d.feature_names = {"fixed_acidity", "volatile_acidity", "citric_acid", "residual_sugar",
                       "chlorides", "free_sulfur_dioxide", "total_sulfur_dioxide", "density",
                       "pH", "sulphates", "alcohol"};
    d.target_name = "quality";
    d.features.resize(n, 11);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double alcohol = 10.5 + 1.2 * z(rng);
        const double sugar = std::max(0.6, 6.4 + 5.0 * z(rng));
        const double volatile_acidity = std::max(0.08, 0.28 + 0.1 * z(rng));
        const double free_so2 = std::max(2.0, 35.0 + 17.0 * z(rng));
        const double total_so2 = std::max(free_so2, 138.0 + 42.0 * z(rng));
        const double density = 0.994 + 0.0004 * sugar - 0.0009 * (alcohol - 10.5) + 0.0008 * z(rng);
        const double fixed = 6.85 + 0.84 * z(rng);
        const double citric = std::max(0.0, 0.33 + 0.12 * z(rng));
        const double chlorides = std::max(0.01, 0.046 + 0.02 * z(rng));
        const double ph = 3.19 + 0.15 * z(rng);
        const double sulphates = std::max(0.2, 0.49 + 0.11 * z(rng));
        const double quality = 5.88 + 0.45 * (alcohol - 10.5) - 2.0 * (volatile_acidity - 0.28) +
                               0.01 * (free_so2 - 35.0) - 0.002 * (total_so2 - 138.0) + 0.5 * z(rng);
        d.features.row(i) << round_to(fixed, 0.1), round_to(volatile_acidity, 0.01), round_to(citric, 0.01),
            round_to(sugar, 0.1), round_to(chlorides, 0.001), round_to(free_so2, 1.0), round_to(total_so2, 1.0),
            round_to(density, 1e-5), round_to(ph, 0.01), round_to(sulphates, 0.01), round_to(alcohol, 0.1);
        d.targets.push_back(format_number(round_to(quality, 0.01)));
    }
    return d;
}

Dataset make_census_like(std::uint64_t seed, std::size_t rows) {
    const std::vector<std::string> workclass{"private", "self_emp", "gov"};
    const std::vector<std::string> marital{"married", "single", "divorced"};
    const std::vector<std::string> country{"us", "mexico", "south", "other"};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::discrete_distribution<int> pick_work({0.7, 0.12, 0.18});
    std::discrete_distribution<int> pick_marital({0.47, 0.33, 0.2});
    std::discrete_distribution<int> pick_country({0.85, 0.06, 0.04, 0.05});
    Dataset d;
    d.feature_names = {"age", "education_num", "hours_per_week"};
    for (const auto& v : workclass) d.feature_names.push_back("workclass=" + v);
    for (const auto& v : marital) d.feature_names.push_back("marital=" + v);
    for (const auto& v : country) d.feature_names.push_back("native_country=" + v);
    d.target_name = "income";
    d.features = FeatureMatrix::Zero(static_cast<Eigen::Index>(rows), 13);
    for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
        const double age = std::clamp(std::round(38.0 + 13.0 * z(rng)), 17.0, 90.0);
        const double edu = std::clamp(std::round(10.0 + 2.5 * z(rng)), 1.0, 16.0);
        const double hours = std::clamp(std::round(40.0 + 12.0 * z(rng)), 1.0, 99.0);
        const int w = pick_work(rng), m = pick_marital(rng), c = pick_country(rng);
        d.features(i, 0) = age;
        d.features(i, 1) = edu;
        d.features(i, 2) = hours;
        d.features(i, 3 + w) = 1.0;
        d.features(i, 6 + m) = 1.0;
        d.features(i, 9 + c) = 1.0;
        const double score = 0.05 * (age - 38.0) + 0.45 * (edu - 10.0) + 0.04 * (hours - 40.0) +
                             (m == 0 ? 1.4 : -0.6) + (w == 1 ? 0.4 : 0.0) + (c == 1 || c == 2 ? -0.8 : 0.0) +
                             0.6 * z(rng);
        d.targets.push_back(score > 0.9 ? ">50K" : "<=50K");
    }
    return d;
}

}  // namespace cforest
