// quadratic_source.hpp: where quadratic-coupling base coefficients come from
//
// The base coefficients d_xx, d_xp, d_pp, c_xp, c_pp are inputs. Accepted JSON
// shapes:
//   {"d_xx": .., "d_xp": .., "d_pp": .., "c_xp": .., "c_pp": ..}
//       fixed values; with an extra "g_ref" they are taken to scale linearly
//       in g and are rescaled by g / g_ref
//   {"table": [{"g": .., "lam": .., "tau": .., "d_xx": .., ...}, ...]}
//       exact lookup per parameter point
//   {"surrogate": "linear-bmme"}
//       a synthetic, non-physical set built from the linear-coupling BMME
//       coefficients; for exercising the machinery only

#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lqbm/coefficients.hpp"
#include "lqbm/error.hpp"

namespace lqbm {

struct QuadraticTableEntry {
    double g{}, lam{}, tau{};
    QuadraticBaseCoefficients base;
};

class QuadraticSource {
public:
    enum class Kind { Fixed, Table, LinearSurrogate };

    static QuadraticSource fixed(const QuadraticBaseCoefficients& b, std::optional<double> g_ref = {}) {
        validate(b);
        if (g_ref && !(*g_ref > 0.0)) throw validation_error("quadratic coefficients: g_ref must be > 0");
        QuadraticSource s;
        s.kind_ = Kind::Fixed;
        s.base_ = b;
        s.g_ref_ = g_ref;
        return s;
    }

    static QuadraticSource table(std::vector<QuadraticTableEntry> entries) {
        for (const auto& e : entries) validate(e.base);
        QuadraticSource s;
        s.kind_ = Kind::Table;
        s.table_ = std::move(entries);
        return s;
    }

    static QuadraticSource linear_surrogate() {
        QuadraticSource s;
        s.kind_ = Kind::LinearSurrogate;
        return s;
    }

    Kind kind() const { return kind_; }

    std::string describe() const {
        switch (kind_) {
            case Kind::Fixed: return g_ref_ ? "fixed (scaled linearly in g)" : "fixed";
            case Kind::Table: return "table (" + std::to_string(table_.size()) + " entries)";
            case Kind::LinearSurrogate: return "linear-bmme surrogate (non-physical)";
        }
        return "unknown";
    }

    QuadraticBaseCoefficients at(const ModelParams& p) const {
        switch (kind_) {
            case Kind::Fixed:
                return g_ref_ ? base_.scaled(p.g / *g_ref_) : base_;
            case Kind::Table:
                for (const auto& e : table_)
                    if (close(e.g, p.g) && close(e.lam, p.lam) && close(e.tau, p.tau)) return e.base;
                {
                    std::ostringstream os;
                    os << "no quadratic coefficients for (g=" << p.g << ", lam=" << p.lam << ", tau=" << p.tau << ")";
                    throw numerical_error(Reason::MissingCoefficients, os.str());
                }
            case Kind::LinearSurrogate: {
                const BmmeCoefficients b = bmme_coefficients(p);
                return {b.d_x, 0.5 * b.d_p, 0.25 * b.d_p, b.c_p, 0.25 * b.c_p};
            }
        }
        throw validation_error("quadratic source: unknown kind");
    }

    QuadraticLmeCoefficients lme_at(const ModelParams& p) const { return quadratic_lme_coefficients(at(p)); }

    static QuadraticSource from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw validation_error("quadratic coefficients: expected a JSON object");
        if (j.contains("surrogate")) {
            if (j.at("surrogate") != "linear-bmme")
                throw validation_error("quadratic coefficients.surrogate: only \"linear-bmme\" is known");
            return linear_surrogate();
        }
        if (j.contains("table")) {
            std::vector<QuadraticTableEntry> rows;
            std::size_t i = 0;
            for (const auto& r : j.at("table")) {
                const std::string where = "quadratic coefficients.table[" + std::to_string(i++) + "]";
                rows.push_back({number(r, "g", where), number(r, "lam", where), number(r, "tau", where),
                                base_from(r, where)});
            }
            return table(std::move(rows));
        }
        std::optional<double> g_ref;
        if (j.contains("g_ref")) g_ref = number(j, "g_ref", "quadratic coefficients");
        return fixed(base_from(j, "quadratic coefficients"), g_ref);
    }

    static QuadraticSource from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open quadratic coefficients file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw io_error("cannot parse " + path + ": " + e.what());
        }
        return from_json(j);
    }

private:
    static bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

    static double number(const nlohmann::json& j, const char* key, const std::string& where) {
        if (!j.contains(key)) throw validation_error(where + "." + key + ": missing");
        const auto& v = j.at(key);
        if (!v.is_number()) throw validation_error(where + "." + key + ": must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw validation_error(where + "." + key + ": must be finite");
        return d;
    }

    static QuadraticBaseCoefficients base_from(const nlohmann::json& j, const std::string& where) {
        QuadraticBaseCoefficients b{number(j, "d_xx", where), number(j, "d_xp", where), number(j, "d_pp", where),
                                    number(j, "c_xp", where), number(j, "c_pp", where)};
        if (!(b.d_xx > 0.0)) throw validation_error(where + ".d_xx: must be > 0");
        return b;
    }

    Kind kind_{Kind::Fixed};
    QuadraticBaseCoefficients base_{};
    std::optional<double> g_ref_;
    std::vector<QuadraticTableEntry> table_;
};

} // namespace lqbm
