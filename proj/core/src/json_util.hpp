#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "pglearn/error.hpp"

namespace pglearn::detail {

// JSON has no inf/nan; they travel as strings.
inline nlohmann::json number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

inline double number(const nlohmann::json &j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw Error("parse_error", "expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

inline nlohmann::json vector_json(const Eigen::VectorXd &v) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number(v(i)));
    return arr;
}

inline Eigen::VectorXd vector_from(const nlohmann::json &j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i]);
    return v;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd &m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    auto data = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) data.push_back(number(m(r, c)));
    j["data"] = std::move(data);
    return j;
}

inline Eigen::MatrixXd matrix_from(const nlohmann::json &j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto &data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error("parse_error", "matrix size mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = number(data[k++]);
    return m;
}

}  // namespace pglearn::detail
