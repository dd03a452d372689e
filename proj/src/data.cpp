#include "kedrl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "kedrl/errors.hpp"

namespace kedrl {
namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

TransitionDataset select_rows(const TransitionDataset& src, const std::vector<Eigen::Index>& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    TransitionDataset out;
    out.states.resize(n, src.state_dim());
    out.actions.resize(n, src.action_dim());
    out.rewards.resize(n, src.reward_dim());
    out.next_states.resize(n, src.state_dim());
    out.next_actions.resize(n, src.action_dim());
    if (src.has_returns()) out.returns.resize(n, src.returns.cols());
    out.trajectory_ids.resize(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = rows[i];
        out.states.row(i) = src.states.row(r);
        out.actions.row(i) = src.actions.row(r);
        out.rewards.row(i) = src.rewards.row(r);
        out.next_states.row(i) = src.next_states.row(r);
        out.next_actions.row(i) = src.next_actions.row(r);
        if (src.has_returns()) out.returns.row(i) = src.returns.row(r);
        out.trajectory_ids[i] = src.trajectory_ids[r];
    }
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

void Trajectory::validate() const {
    const auto t = states.rows();
    detail::require(t >= 1, "Trajectory: needs at least one step");
    detail::require(actions.rows() == t && rewards.rows() == t,
                    "Trajectory: states, actions and rewards must have equal row counts");
    detail::require(all_finite(states) && all_finite(actions) && all_finite(rewards),
                    "Trajectory: entries must be finite");
}

Eigen::MatrixXd TransitionDataset::inputs() const { return hcat(states, actions); }

Eigen::MatrixXd TransitionDataset::next_inputs() const { return hcat(next_states, next_actions); }

int TransitionDataset::trajectory_count() const {
    int count = 0;
    for (std::size_t i = 0; i < trajectory_ids.size(); ++i) {
        if (i == 0 || trajectory_ids[i] != trajectory_ids[i - 1]) ++count;
    }
    return count;
}

void TransitionDataset::validate() const {
    const auto n = size();
    detail::require(n >= 1, "TransitionDataset: empty");
    detail::require(actions.rows() == n && rewards.rows() == n && next_states.rows() == n &&
                        next_actions.rows() == n &&
                        static_cast<Eigen::Index>(trajectory_ids.size()) == n,
                    "TransitionDataset: inconsistent record counts");
    detail::require(next_states.cols() == states.cols() && next_actions.cols() == actions.cols(),
                    "TransitionDataset: inconsistent dimensions");
    detail::require(std::is_sorted(trajectory_ids.begin(), trajectory_ids.end()),
                    "TransitionDataset: trajectory ids must be non-decreasing");
}

TransitionDataset flatten(const std::vector<Trajectory>& trajectories) {
    detail::require(!trajectories.empty(), "flatten: empty trajectory list");
    const auto p = trajectories.front().states.cols();
    const auto q = trajectories.front().actions.cols();
    const auto d = trajectories.front().rewards.cols();
    Eigen::Index n = 0;
    for (const auto& tr : trajectories) {
        tr.validate();
        if (tr.states.cols() != p || tr.actions.cols() != q || tr.rewards.cols() != d) {
            throw InvalidInput("flatten: trajectories disagree on (p, q, d)");
        }
        n += tr.length() - 1;
    }
    TransitionDataset ds;
    ds.states.resize(n, p);
    ds.actions.resize(n, q);
    ds.rewards.resize(n, d);
    ds.next_states.resize(n, p);
    ds.next_actions.resize(n, q);
    ds.trajectory_ids.reserve(n);
    Eigen::Index row = 0;
    for (std::size_t id = 0; id < trajectories.size(); ++id) {
        const auto& tr = trajectories[id];
        const auto steps = tr.length() - 1;
        if (steps <= 0) continue;
        ds.states.middleRows(row, steps) = tr.states.topRows(steps);
        ds.actions.middleRows(row, steps) = tr.actions.topRows(steps);
        ds.rewards.middleRows(row, steps) = tr.rewards.topRows(steps);
        ds.next_states.middleRows(row, steps) = tr.states.bottomRows(steps);
        ds.next_actions.middleRows(row, steps) = tr.actions.bottomRows(steps);
        ds.trajectory_ids.insert(ds.trajectory_ids.end(), steps, static_cast<int>(id));
        row += steps;
    }
    return ds;
}

TransitionDataset flatten_with_returns(const std::vector<Trajectory>& trajectories, double gamma) {
    auto ds = flatten(trajectories);
    ds.returns.resize(ds.size(), ds.reward_dim());
    Eigen::Index row = 0;
    for (const auto& tr : trajectories) {
        for (Eigen::Index t = 0; t + 1 < tr.length(); ++t) {
            ds.returns.row(row++) = discounted_return(tr, t, gamma).transpose();
        }
    }
    return ds;
}

Eigen::VectorXd discounted_return(const Trajectory& traj, Eigen::Index start_index, double gamma) {
    if (start_index < 0 || start_index >= traj.length()) {
        throw InvalidInput("discounted_return: start_index " + std::to_string(start_index) +
                           " outside [0, " + std::to_string(traj.length()) + ")");
    }
    detail::require(gamma >= 0.0 && gamma < 1.0, "discounted_return: gamma must lie in [0, 1)");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(traj.rewards.cols());
    // Backward accumulation: G_t = r_t + gamma G_{t+1}.
    for (Eigen::Index t = traj.length() - 1; t >= start_index; --t) {
        acc = traj.rewards.row(t).transpose() + gamma * acc;
    }
    return acc;
}

std::vector<int> assign_splits(int n_trajectories, const SplitFractions& fractions, std::uint64_t seed) {
    const double f[3] = {fractions.train, fractions.val, fractions.test};
    for (double v : f) detail::require(std::isfinite(v) && v >= 0.0, "split: fractions must be >= 0");
    detail::require(std::abs(f[0] + f[1] + f[2] - 1.0) <= 1e-9, "split: fractions must sum to 1");
    const int nonzero = (f[0] > 0) + (f[1] > 0) + (f[2] > 0);
    if (n_trajectories < nonzero) {
        throw InvalidInput("split: " + std::to_string(n_trajectories) + " trajectories cannot fill " +
                           std::to_string(nonzero) + " nonempty splits");
    }
    // Largest-remainder apportionment, then make sure every requested split is nonempty.
    int counts[3];
    double rema[3];
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = f[i] * n_trajectories;
        counts[i] = static_cast<int>(std::floor(exact + 1e-9));
        rema[i] = exact - counts[i];
        assigned += counts[i];
    }
    while (assigned < n_trajectories) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (rema[i] > rema[best]) best = i;
        ++counts[best];
        rema[best] = -1.0;
        ++assigned;
    }
    for (int i = 0; i < 3; ++i) {
        if (f[i] > 0 && counts[i] == 0) {
            int donor = static_cast<int>(std::max_element(counts, counts + 3) - counts);
            --counts[donor];
            ++counts[i];
        }
    }
    std::vector<int> order(n_trajectories);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> labels(n_trajectories, 0);
    int pos = 0;
    for (int s = 0; s < 3; ++s) {
        for (int c = 0; c < counts[s]; ++c) labels[order[pos++]] = s;
    }
    return labels;
}

std::array<TransitionDataset, 3> split_by_trajectory(const TransitionDataset& dataset,
                                                     const SplitFractions& fractions,
                                                     std::uint64_t seed) {
    dataset.validate();
    // Map trajectory ids to dense positions in order of appearance.
    std::vector<int> dense(dataset.trajectory_ids.size());
    int count = -1;
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (i == 0 || dataset.trajectory_ids[i] != dataset.trajectory_ids[i - 1]) ++count;
        dense[i] = count;
    }
    const auto labels = assign_splits(count + 1, fractions, seed);
    std::array<std::vector<Eigen::Index>, 3> rows;
    for (std::size_t i = 0; i < dense.size(); ++i) rows[labels[dense[i]]].push_back(static_cast<Eigen::Index>(i));
    return {select_rows(dataset, rows[0]), select_rows(dataset, rows[1]), select_rows(dataset, rows[2])};
}

std::array<std::vector<Trajectory>, 3> split_trajectories(const std::vector<Trajectory>& trajectories,
                                                          const SplitFractions& fractions,
                                                          std::uint64_t seed) {
    const auto labels = assign_splits(static_cast<int>(trajectories.size()), fractions, seed);
    std::array<std::vector<Trajectory>, 3> out;
    for (std::size_t i = 0; i < trajectories.size(); ++i) out[labels[i]].push_back(trajectories[i]);
    return out;
}

void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajectories) {
    detail::require(!trajectories.empty(), "write_trajectories_csv: no trajectories");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const auto& first = trajectories.front();
    out << "traj_id,t";
    for (Eigen::Index c = 0; c < first.states.cols(); ++c) out << ",s_" << c;
    for (Eigen::Index c = 0; c < first.actions.cols(); ++c) out << ",a_" << c;
    for (Eigen::Index c = 0; c < first.rewards.cols(); ++c) out << ",r_" << c;
    out << '\n' << std::setprecision(17);
    for (std::size_t id = 0; id < trajectories.size(); ++id) {
        const auto& tr = trajectories[id];
        for (Eigen::Index t = 0; t < tr.length(); ++t) {
            out << id << ',' << t;
            for (Eigen::Index c = 0; c < tr.states.cols(); ++c) out << ',' << tr.states(t, c);
            for (Eigen::Index c = 0; c < tr.actions.cols(); ++c) out << ',' << tr.actions(t, c);
            for (Eigen::Index c = 0; c < tr.rewards.cols(); ++c) out << ',' << tr.rewards(t, c);
            out << '\n';
        }
    }
    if (!out) throw IoError("write failed for " + path);
}

std::vector<Trajectory> read_trajectories_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "traj_id" || header[1] != "t") {
        throw InvalidInput(path + ": header must start with traj_id,t");
    }
    int p = 0, q = 0, d = 0;
    for (std::size_t c = 2; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h.rfind("s_", 0) == 0 && q == 0 && d == 0) ++p;
        else if (h.rfind("a_", 0) == 0 && d == 0) ++q;
        else if (h.rfind("r_", 0) == 0) ++d;
        else throw InvalidInput(path + ": unexpected column '" + h + "'");
    }
    detail::require(p > 0 && q > 0 && d > 0, path + ": need at least one s_, a_ and r_ column");

    struct Row { long id; long t; std::vector<double> v; };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        }
        Row r;
        try {
            r.id = std::stol(cells[0]);
            r.t = std::stol(cells[1]);
            r.v.reserve(cells.size() - 2);
            for (std::size_t c = 2; c < cells.size(); ++c) r.v.push_back(std::stod(cells[c]));
        } catch (const std::exception&) {
            throw InvalidInput(path + ":" + std::to_string(lineno) + ": unparsable number");
        }
        rows.push_back(std::move(r));
    }
    detail::require(!rows.empty(), path + ": no data rows");

    std::vector<Trajectory> out;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].id == rows[i].id) ++j;
        const auto len = static_cast<Eigen::Index>(j - i);
        Trajectory tr;
        tr.states.resize(len, p);
        tr.actions.resize(len, q);
        tr.rewards.resize(len, d);
        for (Eigen::Index t = 0; t < len; ++t) {
            const auto& r = rows[i + t];
            if (r.t != t) {
                throw InvalidInput(path + ": trajectory " + std::to_string(r.id) +
                                   " steps must be contiguous from t=0");
            }
            for (int c = 0; c < p; ++c) tr.states(t, c) = r.v[c];
            for (int c = 0; c < q; ++c) tr.actions(t, c) = r.v[p + c];
            for (int c = 0; c < d; ++c) tr.rewards(t, c) = r.v[p + q + c];
        }
        tr.validate();
        out.push_back(std::move(tr));
        i = j;
    }
    return out;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
    nlohmann::json j = {{"state_dim", m.state_dim},       {"action_dim", m.action_dim},
                        {"reward_dim", m.reward_dim},     {"gamma", m.gamma},
                        {"seed", m.seed},                 {"n_trajectories", m.n_trajectories},
                        {"csv_file", m.csv_file}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path + ": " + e.what());
    }
    DatasetManifest m;
    m.state_dim = j.at("state_dim").get<int>();
    m.action_dim = j.at("action_dim").get<int>();
    m.reward_dim = j.at("reward_dim").get<int>();
    m.gamma = j.at("gamma").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_trajectories = j.at("n_trajectories").get<int>();
    m.csv_file = j.value("csv_file", std::string{});
    return m;
}

}  // namespace kedrl
