#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "rome/environments.hpp"
#include "rome/error.hpp"

namespace rome {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return in;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

bool blank(std::string_view line) { return trim(line).empty(); }

}  // namespace

std::shared_ptr<ClassificationData> load_covertype(const std::filesystem::path& path) {
    constexpr std::size_t n_features = 54;
    constexpr std::int64_t n_classes = 7;
    auto in = open_input(path);
    const std::string source = path.string();

    auto data = std::make_shared<ClassificationData>();
    data->dim = n_features;
    data->n_classes = n_classes;
    FeatureVector x(n_features);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto fields = split_fields(line);
        if (fields.size() != n_features + 1) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(n_features + 1) + " columns, found " +
                                 std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < n_features; ++j) {
            const auto v = parse_double(fields[j]);
            if (!v || !std::isfinite(*v)) throw ParseError(source, line_no, "non-numeric value in column " + std::to_string(j + 1));
            x[j] = *v;
        }
        const auto label = parse_int(fields[n_features]);
        if (!label || *label < 1 || *label > n_classes) throw ParseError(source, line_no, "class must be an integer in 1..7");
        data->add(x, static_cast<std::size_t>(*label - 1));
    }
    data->n_classes = n_classes;
    if (data->size() == 0) throw ParseError(source, line_no, "no data rows");
    return data;
}

CategoricalEncoder CategoricalEncoder::fit(const std::vector<std::vector<std::string>>& rows) {
    CategoricalEncoder enc;
    if (rows.empty()) return enc;
    const std::size_t n_cols = rows.front().size();
    enc.columns_.resize(n_cols);
    for (std::size_t c = 0; c < n_cols; ++c) {
        Column& col = enc.columns_[c];
        col.numeric = std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return parse_double(r[c]).has_value(); });
        if (!col.numeric) {
            for (const auto& r : rows) col.categories.push_back(r[c]);
            std::sort(col.categories.begin(), col.categories.end());
            col.categories.erase(std::unique(col.categories.begin(), col.categories.end()), col.categories.end());
        }
        col.offset = enc.width_;
        enc.width_ += col.numeric ? 1 : col.categories.size();
    }
    return enc;
}

FeatureVector CategoricalEncoder::transform(const std::vector<std::string>& row) const {
    if (row.size() != columns_.size()) throw InvalidInput("row has the wrong number of feature columns");
    FeatureVector out(width_, 0.0);
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const Column& col = columns_[c];
        if (col.numeric) {
            out[col.offset] = parse_double(row[c]).value_or(0.0);
            continue;
        }
        const auto it = std::lower_bound(col.categories.begin(), col.categories.end(), row[c]);
        if (it != col.categories.end() && *it == row[c]) {
            out[col.offset + static_cast<std::size_t>(it - col.categories.begin())] = 1.0;
        }
    }
    return out;
}

std::shared_ptr<ClassificationData> load_chorales(const std::filesystem::path& path) {
    auto in = open_input(path);
    const std::string source = path.string();

    std::vector<std::vector<std::string>> features;
    std::vector<std::string> labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t n_cols = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto fields = split_fields(line);
        if (n_cols == 0) {
            if (fields.size() < 2) throw ParseError(source, line_no, "need at least one feature and a label");
            n_cols = fields.size();
        }
        if (fields.size() != n_cols) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(n_cols) + " columns, found " + std::to_string(fields.size()));
        }
        if (fields.back().empty()) throw ParseError(source, line_no, "empty class label");
        features.emplace_back(fields.begin(), fields.end() - 1);
        labels.emplace_back(fields.back());
    }
    if (labels.empty()) throw ParseError(source, line_no, "no data rows");

    std::vector<std::string> classes = labels;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const auto encoder = CategoricalEncoder::fit(features);

    auto data = std::make_shared<ClassificationData>();
    data->dim = encoder.width();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), labels[i]);
        data->add(encoder.transform(features[i]), static_cast<std::size_t>(it - classes.begin()));
    }
    data->n_classes = classes.size();
    return data;
}

std::vector<Interaction> load_movielens(const std::filesystem::path& path) {
    auto in = open_input(path);
    const std::string source = path.string();
    std::string line;
    std::size_t line_no = 0;
    std::vector<Interaction> out;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto fields = split_fields(line);
        if (!header_seen) {
            if (fields.size() < 3 || fields[0] != "userId" || fields[1] != "movieId" || fields[2] != "rating") {
                throw ParseError(source, line_no, "expected header userId,movieId,rating,timestamp");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 4) {
            throw ParseError(source, line_no, "expected 4 columns, found " + std::to_string(fields.size()));
        }
        const auto user = parse_int(fields[0]);
        const auto item = parse_int(fields[1]);
        const auto rating = parse_double(fields[2]);
        if (!user || !item || !rating) throw ParseError(source, line_no, "malformed rating row");
        out.push_back({*user, *item, *rating});
    }
    if (out.empty()) throw ParseError(source, line_no, "no data rows");
    return out;
}

std::shared_ptr<DepletingData> load_movielens_depleting(const std::filesystem::path& path, std::uint64_t seed,
                                                        std::size_t context_dim) {
    return std::make_shared<DepletingData>(build_depleting_data(load_movielens(path), seed, context_dim));
}

}  // namespace rome
