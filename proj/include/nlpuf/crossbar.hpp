#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlpuf/common.hpp"
#include "nlpuf/device.hpp"

namespace nlpuf {

// =============================================================================
// Topology
// =============================================================================
//
// Layer 0 devices sit between bottom rows and the column lines. In a two-layer stack with
// shared_middle, layer 1 devices sit between the same column lines and a second set of
// (top) rows. A device at (layer, r, c) conducts from its column line to its row line.
//
// Flat line numbering: layer 0 rows [0, M), layer 0 cols [M, M+N), layer 1 rows
// [M+N, 2M+N), and, without a shared middle, layer 1 cols [2M+N, 2M+2N).

enum class LineKind { Row, Col };

struct LineId {
    int layer = 0;
    LineKind kind = LineKind::Row;
    int index = 0;
};

struct Device {
    DeviceParams params;
    DeviceState state;
};

class CrossbarArray {
public:
    CrossbarArray() = default;

    CrossbarArray(int layers, int rows, int cols, bool shared_middle = true)
        : layers_(layers), rows_(rows), cols_(cols), shared_middle_(shared_middle) {
        if (layers != 1 && layers != 2) throw DomainError("crossbar: layers must be 1 or 2");
        if (rows < 1 || cols < 1) throw DomainError("crossbar: dimensions must be positive");
        devices_.resize(static_cast<std::size_t>(layers) * rows * cols);
    }

    /// Samples every crosspoint from the process model in (layer, row, col) order.
    static CrossbarArray sample(int layers, int rows, int cols, bool shared_middle, const ProcessVariation& pv,
                                Rng& rng) {
        CrossbarArray a(layers, rows, cols, shared_middle);
        for (auto& d : a.devices_) {
            auto [p, s] = sample_device(pv, rng);
            d = Device{p, s};
        }
        return a;
    }

    [[nodiscard]] int layers() const { return layers_; }
    [[nodiscard]] int rows() const { return rows_; }
    [[nodiscard]] int cols() const { return cols_; }
    [[nodiscard]] bool shared_middle() const { return shared_middle_; }
    [[nodiscard]] std::size_t device_count() const { return devices_.size(); }

    [[nodiscard]] Device& at(int layer, int r, int c) { return devices_[flat(layer, r, c)]; }
    [[nodiscard]] const Device& at(int layer, int r, int c) const { return devices_[flat(layer, r, c)]; }

    [[nodiscard]] std::span<Device> devices() { return devices_; }
    [[nodiscard]] std::span<const Device> devices() const { return devices_; }

    [[nodiscard]] int line_count() const {
        if (layers_ == 1) return rows_ + cols_;
        return shared_middle_ ? 2 * rows_ + cols_ : 2 * (rows_ + cols_);
    }

    [[nodiscard]] int row_line(int layer, int r) const {
        check_line(layer, r, rows_);
        return layer == 0 ? r : rows_ + cols_ + r;
    }

    [[nodiscard]] int col_line(int layer, int c) const {
        check_line(layer, c, cols_);
        if (layer == 0 || shared_middle_) return rows_ + c;
        return 2 * rows_ + cols_ + c;
    }

    [[nodiscard]] int line_index(const LineId& id) const {
        return id.kind == LineKind::Row ? row_line(id.layer, id.index) : col_line(id.layer, id.index);
    }

    /// Canonical id of a flat line (shared middle lines report layer 0).
    [[nodiscard]] LineId line_id(int line) const {
        if (line < 0 || line >= line_count()) throw DomainError("crossbar: line index out of range");
        const int M = rows_, N = cols_;
        if (line < M) return {0, LineKind::Row, line};
        if (line < M + N) return {0, LineKind::Col, line - M};
        if (line < 2 * M + N) return {1, LineKind::Row, line - M - N};
        return {1, LineKind::Col, line - 2 * M - N};
    }

private:
    [[nodiscard]] std::size_t flat(int layer, int r, int c) const {
        if (layer < 0 || layer >= layers_ || r < 0 || r >= rows_ || c < 0 || c >= cols_)
            throw DomainError("crossbar: device address out of range");
        return (static_cast<std::size_t>(layer) * rows_ + r) * cols_ + c;
    }

    void check_line(int layer, int i, int n) const {
        if (layer < 0 || layer >= layers_ || i < 0 || i >= n) throw DomainError("crossbar: line address out of range");
    }

    int layers_ = 1;
    int rows_ = 0;
    int cols_ = 0;
    bool shared_middle_ = true;
    std::vector<Device> devices_;
};

// =============================================================================
// Bias configuration
// =============================================================================

enum class LineRole { Floating, Driven, VirtualGround, Grounded };

struct LineBias {
    LineRole role = LineRole::Floating;
    Scalar volts = 0.0;

    static LineBias driven(Scalar v) { return {LineRole::Driven, v}; }
    static LineBias virtual_ground() { return {LineRole::VirtualGround, 0.0}; }
    static LineBias grounded() { return {LineRole::Grounded, 0.0}; }
    static LineBias floating() { return {LineRole::Floating, 0.0}; }

    [[nodiscard]] bool fixed() const { return role != LineRole::Floating; }
};

class BiasConfig {
public:
    BiasConfig() = default;
    explicit BiasConfig(const CrossbarArray& array) : lines_(array.line_count()) {}
    explicit BiasConfig(int line_count) : lines_(line_count) {}

    void set(int line, LineBias b) {
        if (line < 0 || line >= static_cast<int>(lines_.size())) throw DomainError("bias: line index out of range");
        lines_[line] = b;
    }

    [[nodiscard]] const LineBias& operator[](int line) const { return lines_[line]; }
    [[nodiscard]] int size() const { return static_cast<int>(lines_.size()); }

    void validate(const CrossbarArray& array) const {
        if (size() != array.line_count()) throw DomainError("bias: line count does not match array");
        bool driven = false, sink = false;
        for (const auto& l : lines_) {
            if (l.role == LineRole::Driven) {
                require_finite(l.volts, "driven voltage");
                driven = true;
            }
            if (l.role == LineRole::VirtualGround) sink = true;
        }
        if (!driven || !sink) throw DomainError("bias: need at least one Driven and one VirtualGround line");
    }

private:
    std::vector<LineBias> lines_;
};

// =============================================================================
// Nonlinear nodal analysis
// =============================================================================

struct SolverOptions {
    Scalar abs_tol = 1e-12;          // A, scaled by max(1, I_scale / 1 uA)
    int max_iterations = 100;
    Scalar damping = 0.5;            // step factor applied while the residual grows
    int max_backtracks = 40;
    Scalar wire_resistance = 0.0;    // ohm per line segment between adjacent crosspoints
};

struct SolveResult {
    std::vector<Scalar> line_voltage;       // per line; for resistive lines the terminal-end node
    std::vector<Scalar> terminal_current;   // per line, into the external terminal (sink positive)
    std::vector<LineRole> roles;
    Scalar residual = 0.0;                  // max |KCL| over unknown nodes (A)
    Scalar tolerance = 0.0;                 // convergence threshold that was applied (A)
    int iterations = 0;
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, Scalar residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    [[nodiscard]] Scalar residual() const { return residual_; }
    [[nodiscard]] int iterations() const { return iterations_; }

private:
    Scalar residual_;
    int iterations_;
};

namespace detail {

struct Branch {
    int a;      // node the current leaves
    int b;      // node the current enters
    IvCurve iv;
};

struct Wire {
    int a;
    int b;
    Scalar g;
};

/// Node graph of one bias point. Each line is one node when wires are ideal; otherwise a
/// chain of crosspoint nodes plus a terminal node for lines that are not floating.
struct Netlist {
    std::vector<Scalar> fixed;           // NaN for unknown nodes
    std::vector<Branch> branches;
    std::vector<Wire> wires;
    std::vector<int> terminal_node;      // per line
    std::vector<int> terminal_wire;      // per line, -1 with ideal wires
};

inline Netlist build_netlist(const CrossbarArray& array, const BiasConfig& bias, Scalar wire_resistance) {
    constexpr Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
    Netlist net;
    const int L = array.line_count();
    net.terminal_node.assign(L, -1);
    net.terminal_wire.assign(L, -1);
    const int M = array.rows(), N = array.cols();

    if (wire_resistance <= 0.0) {
        net.fixed.resize(L, nan);
        for (int l = 0; l < L; ++l) {
            net.terminal_node[l] = l;
            if (bias[l].fixed()) net.fixed[l] = bias[l].volts;
        }
        net.branches.reserve(array.device_count());
        for (int layer = 0; layer < array.layers(); ++layer)
            for (int r = 0; r < M; ++r)
                for (int c = 0; c < N; ++c) {
                    const auto& d = array.at(layer, r, c);
                    net.branches.push_back({array.col_line(layer, c), array.row_line(layer, r), make_iv(d.state, d.params)});
                }
        return net;
    }

    // Row lines have one node per column position, column lines one per row position.
    // The shared middle column is crossed by both layers at the same row position.
    const Scalar gw = 1.0 / wire_resistance;
    std::vector<int> first(L);
    int nodes = 0;
    for (int l = 0; l < L; ++l) {
        first[l] = nodes;
        nodes += array.line_id(l).kind == LineKind::Row ? N : M;
    }
    net.fixed.assign(nodes, nan);
    for (int l = 0; l < L; ++l) {
        const int len = array.line_id(l).kind == LineKind::Row ? N : M;
        for (int k = 0; k + 1 < len; ++k) net.wires.push_back({first[l] + k, first[l] + k + 1, gw});
        if (bias[l].fixed()) {
            const int t = static_cast<int>(net.fixed.size());
            net.fixed.push_back(bias[l].volts);
            net.terminal_node[l] = t;
            net.terminal_wire[l] = static_cast<int>(net.wires.size());
            net.wires.push_back({first[l], t, gw});
        } else {
            net.terminal_node[l] = first[l];
        }
    }
    for (int layer = 0; layer < array.layers(); ++layer)
        for (int r = 0; r < M; ++r)
            for (int c = 0; c < N; ++c) {
                const auto& d = array.at(layer, r, c);
                const int col_node = first[array.col_line(layer, c)] + r;
                const int row_node = first[array.row_line(layer, r)] + c;
                net.branches.push_back({col_node, row_node, make_iv(d.state, d.params)});
            }
    return net;
}

inline int find_root(std::vector<int>& parent, int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
}

}  // namespace detail

/// DC operating point of the crossbar under a bias configuration.
///
/// Unknowns are the floating node voltages; Newton's method on KCL with the analytic
/// device slope, halving the step while the residual grows. Floating islands with no path to
/// a fixed line carry no current and are reported at 0 V.
inline SolveResult solve_network(const CrossbarArray& array, const BiasConfig& bias, const SolverOptions& opt = {}) {
    bias.validate(array);
    const detail::Netlist net = detail::build_netlist(array, bias, opt.wire_resistance);
    const int nodes = static_cast<int>(net.fixed.size());

    std::vector<int> parent(nodes);
    std::iota(parent.begin(), parent.end(), 0);
    auto unite = [&](int a, int b) { parent[detail::find_root(parent, a)] = detail::find_root(parent, b); };
    for (const auto& br : net.branches) unite(br.a, br.b);
    for (const auto& w : net.wires) unite(w.a, w.b);
    std::vector<char> anchored(nodes, 0);
    for (int i = 0; i < nodes; ++i)
        if (!std::isnan(net.fixed[i])) anchored[detail::find_root(parent, i)] = 1;

    std::vector<Scalar> v(nodes, 0.0);
    std::vector<int> unknown(nodes, -1);
    int n = 0;
    Scalar drive_sum = 0.0;
    int drive_count = 0;
    for (int l = 0; l < bias.size(); ++l)
        if (bias[l].role == LineRole::Driven) {
            drive_sum += bias[l].volts;
            ++drive_count;
        }
    const Scalar guess = 0.5 * drive_sum / drive_count;
    for (int i = 0; i < nodes; ++i) {
        if (!std::isnan(net.fixed[i])) {
            v[i] = net.fixed[i];
        } else if (anchored[detail::find_root(parent, i)]) {
            unknown[i] = n++;
            v[i] = guess;
        }
    }

    Eigen::VectorXd F(n);
    Eigen::MatrixXd J(n, n);
    Scalar i_scale = 0.0;

    // F = net current into each unknown node; J = -dF/dv (a weighted Laplacian, SPD)
    auto assemble = [&](const std::vector<Scalar>& x, bool jacobian) {
        F.setZero();
        if (jacobian) J.setZero();
        i_scale = 0.0;
        for (const auto& br : net.branches) {
            Scalar i, di;
            br.iv.eval(x[br.a] - x[br.b], i, di);
            i_scale = std::max(i_scale, std::abs(i));
            const int ua = unknown[br.a], ub = unknown[br.b];
            if (ua >= 0) F[ua] -= i;
            if (ub >= 0) F[ub] += i;
            if (jacobian) {
                if (ua >= 0) J(ua, ua) += di;
                if (ub >= 0) J(ub, ub) += di;
                if (ua >= 0 && ub >= 0) {
                    J(ua, ub) -= di;
                    J(ub, ua) -= di;
                }
            }
        }
        for (const auto& w : net.wires) {
            const Scalar i = w.g * (x[w.a] - x[w.b]);
            const int ua = unknown[w.a], ub = unknown[w.b];
            if (ua >= 0) F[ua] -= i;
            if (ub >= 0) F[ub] += i;
            if (jacobian) {
                if (ua >= 0) J(ua, ua) += w.g;
                if (ub >= 0) J(ub, ub) += w.g;
                if (ua >= 0 && ub >= 0) {
                    J(ua, ub) -= w.g;
                    J(ub, ua) -= w.g;
                }
            }
        }
        return n > 0 ? F.cwiseAbs().maxCoeff() : 0.0;
    };

    auto tolerance = [&] { return opt.abs_tol * std::max(1.0, i_scale / 1e-6); };

    Scalar residual = assemble(v, true);
    int it = 0;
    while (residual > tolerance()) {
        if (it >= opt.max_iterations)
            throw SolverError("solve_network: no convergence, residual " + std::to_string(residual) + " A", residual, it);
        ++it;
        Eigen::LLT<Eigen::MatrixXd> llt(J);
        if (llt.info() != Eigen::Success) throw SolverError("solve_network: singular Jacobian", residual, it);
        const Eigen::VectorXd dx = llt.solve(F);

        std::vector<Scalar> trial = v;
        Scalar alpha = 1.0, r_new = 0.0;
        for (int bt = 0;; ++bt) {
            for (int i = 0; i < nodes; ++i)
                if (unknown[i] >= 0) trial[i] = v[i] + alpha * dx[unknown[i]];
            r_new = assemble(trial, false);
            if (r_new <= residual || bt >= opt.max_backtracks) break;
            alpha *= opt.damping;
        }
        v.swap(trial);
        residual = assemble(v, true);
    }
    // polish: full steps while they still reduce the residual
    for (int k = 0; k < 3 && residual > 0.0; ++k) {
        Eigen::LLT<Eigen::MatrixXd> llt(J);
        if (llt.info() != Eigen::Success) break;
        const Eigen::VectorXd dx = llt.solve(F);
        std::vector<Scalar> trial = v;
        for (int i = 0; i < nodes; ++i)
            if (unknown[i] >= 0) trial[i] = v[i] + dx[unknown[i]];
        const Scalar r_new = assemble(trial, true);
        if (!(r_new < residual)) {
            assemble(v, true);
            break;
        }
        v.swap(trial);
        residual = r_new;
    }

    SolveResult res;
    res.roles.resize(bias.size());
    res.line_voltage.resize(bias.size());
    res.terminal_current.assign(bias.size(), 0.0);
    res.residual = residual;
    res.tolerance = tolerance();
    res.iterations = it;

    // terminal current = current arriving at the fixed node from the network
    std::vector<Scalar> into(nodes, 0.0);
    for (const auto& br : net.branches) {
        const Scalar i = br.iv.current(v[br.a] - v[br.b]);
        into[br.a] -= i;
        into[br.b] += i;
    }
    for (int l = 0; l < bias.size(); ++l) {
        res.roles[l] = bias[l].role;
        res.line_voltage[l] = v[net.terminal_node[l]];
        if (!bias[l].fixed()) continue;
        if (net.terminal_wire[l] >= 0) {
            const auto& w = net.wires[net.terminal_wire[l]];
            res.terminal_current[l] = w.g * (v[w.a] - v[w.b]);
        } else {
            res.terminal_current[l] = into[net.terminal_node[l]];
        }
    }
    return res;
}

/// Signed sum of terminal currents over virtually grounded lines.
inline Scalar group_current(const SolveResult& result, std::span<const int> lines) {
    Scalar sum = 0.0;
    for (int l : lines) {
        if (l < 0 || l >= static_cast<int>(result.roles.size())) throw DomainError("group_current: line out of range");
        if (result.roles[l] != LineRole::VirtualGround) throw DomainError("group_current: line is not virtually grounded");
        sum += result.terminal_current[l];
    }
    return sum;
}

// =============================================================================
// Conductance map CSV: layer,row,col,g_ref_microsiemens
// =============================================================================

inline constexpr const char* kMapHeader = "layer,row,col,g_ref_microsiemens";

inline std::string format_sig9(Scalar x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

inline void write_map(std::ostream& os, const CrossbarArray& array) {
    os << kMapHeader << '\n';
    for (int layer = 0; layer < array.layers(); ++layer)
        for (int r = 0; r < array.rows(); ++r)
            for (int c = 0; c < array.cols(); ++c)
                os << layer << ',' << r << ',' << c << ',' << format_sig9(array.at(layer, r, c).state.g_ref * 1e6) << '\n';
}

/// Loads device states from a map; every crosspoint must appear exactly once.
inline void read_map(std::istream& is, CrossbarArray& array) {
    std::string line;
    int lineno = 0;
    std::vector<char> seen(array.device_count(), 0);
    std::size_t count = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line == kMapHeader) continue;
        std::istringstream ss(line);
        int layer, r, c;
        double g_us;
        char c1, c2, c3;
        if (!(ss >> layer >> c1 >> r >> c2 >> c >> c3 >> g_us) || c1 != ',' || c2 != ',' || c3 != ',')
            throw ParseError("map: expected layer,row,col,g_ref_microsiemens", lineno);
        if (layer < 0 || layer >= array.layers() || r < 0 || r >= array.rows() || c < 0 || c >= array.cols())
            throw ParseError("map: device address out of range", lineno);
        auto& d = array.at(layer, r, c);
        const std::size_t idx = (static_cast<std::size_t>(layer) * array.rows() + r) * array.cols() + c;
        if (seen[idx]) throw ParseError("map: duplicate device", lineno);
        seen[idx] = 1;
        ++count;
        const Scalar g = g_us * 1e-6;
        if (!(g >= d.params.g_min * (1 - 1e-9) && g <= d.params.g_max * (1 + 1e-9)))
            throw ParseError("map: conductance outside device range", lineno);
        d.state.g_ref = std::clamp(g, d.params.g_min, d.params.g_max);
    }
    if (count != array.device_count()) throw ParseError("map: missing devices");
}

// -----------------------------------------------------------------------------
// Filament-configuration sidecar: layer,row,col,b_shift (17 significant digits)
// -----------------------------------------------------------------------------

inline constexpr const char* kShiftMapHeader = "layer,row,col,b_shift";

inline void write_shift_map(std::ostream& os, const CrossbarArray& array) {
    char buf[40];
    os << kShiftMapHeader << '\n';
    for (int layer = 0; layer < array.layers(); ++layer)
        for (int r = 0; r < array.rows(); ++r)
            for (int c = 0; c < array.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", array.at(layer, r, c).state.b_shift);
                os << layer << ',' << r << ',' << c << ',' << buf << '\n';
            }
}

inline void read_shift_map(std::istream& is, CrossbarArray& array) {
    std::string line;
    int lineno = 0;
    std::vector<char> seen(array.device_count(), 0);
    std::size_t count = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line == kShiftMapHeader) continue;
        std::istringstream ss(line);
        int layer, r, c;
        double shift;
        char c1, c2, c3;
        if (!(ss >> layer >> c1 >> r >> c2 >> c >> c3 >> shift) || c1 != ',' || c2 != ',' || c3 != ',' ||
            !std::isfinite(shift))
            throw ParseError("shift map: expected layer,row,col,b_shift", lineno);
        if (layer < 0 || layer >= array.layers() || r < 0 || r >= array.rows() || c < 0 || c >= array.cols())
            throw ParseError("shift map: device address out of range", lineno);
        const std::size_t idx = (static_cast<std::size_t>(layer) * array.rows() + r) * array.cols() + c;
        if (seen[idx]) throw ParseError("shift map: duplicate device", lineno);
        seen[idx] = 1;
        ++count;
        array.at(layer, r, c).state.b_shift = shift;
    }
    if (count != array.device_count()) throw ParseError("shift map: missing devices");
}

}  // namespace nlpuf
