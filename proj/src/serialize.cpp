#include "kedrl/serialize.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "kedrl/errors.hpp"

namespace kedrl {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    detail::require(j.is_array(), "expected a JSON array of numbers");
    const auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    auto out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::VectorXd row = m.row(i).transpose();
        out.push_back(vector_to_json(row));
    }
    return out;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    detail::require(j.is_array(), "expected a JSON array of rows");
    if (j.empty()) return {};
    const auto cols = j.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        detail::require(j[i].is_array() && j[i].size() == cols, "matrix rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

nlohmann::json params_to_json(const MaternParams& p) {
    return {{"nu", p.nu}, {"length_scale", p.length_scale}, {"variance", p.variance}};
}

MaternParams params_from_json(const nlohmann::json& j) {
    detail::require(j.is_object(), "kernel params must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (key != "nu" && key != "length_scale" && key != "variance" && key != "sigma") {
            throw InvalidInput("kernel params: unknown key '" + key + "'");
        }
    }
    detail::require(!(j.contains("variance") && j.contains("sigma")),
                    "kernel params: give either 'variance' or 'sigma', not both");
    MaternParams p;
    p.nu = j.at("nu").get<double>();
    p.length_scale = j.at("length_scale").get<double>();
    if (j.contains("sigma")) {
        const double s = j.at("sigma").get<double>();
        p.variance = s * s;
    } else {
        p.variance = j.at("variance").get<double>();
    }
    p.validate();
    return p;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, const std::string& header) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    if (!header.empty()) out << header << '\n';
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << m(i, c);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::istringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw InvalidInput(path + ": non-numeric row");
        }
        first = false;
        if (!rows.empty() && vals.size() != rows.front().size()) {
            throw InvalidInput(path + ": ragged rows");
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < rows[i].size(); ++c) m(i, c) = rows[i][c];
    return m;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path + ": invalid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace kedrl
