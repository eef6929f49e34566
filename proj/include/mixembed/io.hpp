#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "baselines.hpp"
#include "error.hpp"
#include "gmm_embed.hpp"
#include "pt_model.hpp"
#include "trainer.hpp"
#include "transport.hpp"

namespace mixembed {

using Json = nlohmann::json;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Doubles go into JSON as numbers when finite and as strings otherwise.
inline Json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ValidationError("failed while writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw ValidationError(what + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Mixtures

inline Json to_json(const GaussianMixture1D& m) {
    Json comps = Json::array();
    for (const auto& c : m.components)
        comps.push_back({{"w", c.weight}, {"mean", c.gaussian.mean}, {"std", c.gaussian.std}});
    return {{"dim", 1}, {"components", comps}};
}

inline Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline Json to_json(const GaussianMixtureD& m) {
    Json comps = Json::array();
    for (const auto& c : m.components)
        comps.push_back({{"w", c.weight}, {"mean", c.gaussian.mean}, {"cov", to_json(c.gaussian.cov)}});
    return {{"dim", m.dim()}, {"components", comps}};
}

inline Matrix matrix_from_json(const Json& j) {
    detail::require(j.is_array(), "matrix must be a JSON array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? j.front().size() : 0;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        detail::require(j[r].is_array() && j[r].size() == cols, "matrix rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

inline GaussianMixture1D mixture1d_from_json(const Json& j) {
    try {
        detail::require(j.value("dim", 1) == 1, "expected a univariate mixture");
        GaussianMixture1D m;
        for (const auto& c : j.at("components"))
            m.components.push_back(
                {c.at("w").get<double>(), {c.at("mean").get<double>(), c.at("std").get<double>()}});
        validate(m);
        return m;
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed mixture JSON: ") + e.what());
    }
}

inline GaussianMixtureD mixtured_from_json(const Json& j) {
    try {
        GaussianMixtureD m;
        for (const auto& c : j.at("components"))
            m.components.push_back({c.at("w").get<double>(),
                                    {c.at("mean").get<std::vector<double>>(), matrix_from_json(c.at("cov"))}});
        validate(m);
        return m;
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed mixture JSON: ") + e.what());
    }
}

/// A labelled list of univariate mixtures: {"mixtures": [{"label", "dim", "components"}]}.
struct LabelledMixture {
    std::string label;
    GaussianMixture1D mixture;
};

inline Json to_json(const std::vector<LabelledMixture>& list) {
    Json arr = Json::array();
    for (const auto& lm : list) {
        Json j = to_json(lm.mixture);
        j["label"] = lm.label;
        arr.push_back(std::move(j));
    }
    return {{"mixtures", arr}};
}

inline std::vector<LabelledMixture> mixtures_from_json(const Json& j) {
    std::vector<LabelledMixture> out;
    try {
        for (const auto& item : j.at("mixtures"))
            out.push_back({item.value("label", std::to_string(out.size())), mixture1d_from_json(item)});
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed mixture list: ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Models

inline Json to_json(const MLPParams& p) {
    Json layers = Json::array();
    for (const auto& l : p.layers)
        layers.push_back({{"rows", l.out_dim()}, {"cols", l.in_dim()}, {"weight", l.weight.data()}, {"bias", l.bias}});
    return layers;
}

inline MLPParams mlp_from_json(const Json& j) {
    MLPParams p;
    for (const auto& l : j) {
        const auto rows = l.at("rows").get<std::size_t>(), cols = l.at("cols").get<std::size_t>();
        const auto w = l.at("weight").get<std::vector<double>>();
        detail::require(w.size() == rows * cols, "checkpoint layer weight has the wrong length");
        DenseLayer layer{Matrix(rows, cols), l.at("bias").get<std::vector<double>>()};
        std::copy(w.begin(), w.end(), layer.weight.data().begin());
        p.layers.push_back(std::move(layer));
    }
    validate(p);
    return p;
}

inline Json to_json(const EmbeddingModel& model) {
    if (const auto* pt = std::get_if<PTParams>(&model)) {
        Json j{{"type", "probabilistic_transformer"},
               {"K", pt->mixture_count()},
               {"D", pt->output_dim},
               {"L", pt->landmark_count()},
               {"landmarks", pt->landmarks.indices},
               {"weight_net", to_json(pt->weight_net)}};
        j["trunk"] = pt->trunk ? to_json(*pt->trunk) : Json(nullptr);
        Json heads = Json::array();
        for (const auto& h : pt->heads) heads.push_back(to_json(h));
        j["heads"] = heads;
        return j;
    }
    const auto& b = std::get<BaselineParams>(model);
    return {{"type", "baseline"},          {"head", to_string(b.kind)},      {"dim", b.dim},
            {"L", b.landmarks.indices.size()}, {"landmarks", b.landmarks.indices}, {"trunk", to_json(b.trunk)},
            {"readout", to_json(b.readout)}};
}

/// Reads a checkpoint; landmark indices are checked against a space of `space_size` points.
inline EmbeddingModel model_from_json(const Json& j, std::size_t space_size) {
    try {
        const auto type = j.at("type").get<std::string>();
        LandmarkSet lm = make_landmarks(j.at("landmarks").get<std::vector<std::size_t>>(), space_size);
        if (type == "probabilistic_transformer") {
            PTParams p;
            p.landmarks = std::move(lm);
            p.output_dim = j.at("D").get<std::size_t>();
            if (!j.at("trunk").is_null()) p.trunk = mlp_from_json(j.at("trunk"));
            p.weight_net = mlp_from_json(j.at("weight_net"));
            for (const auto& h : j.at("heads")) p.heads.push_back(mlp_from_json(h));
            validate(p);
            return p;
        }
        if (type == "baseline") {
            BaselineParams b;
            b.landmarks = std::move(lm);
            b.kind = head_kind_from_string(j.at("head").get<std::string>());
            b.dim = j.at("dim").get<std::size_t>();
            b.trunk = mlp_from_json(j.at("trunk"));
            b.readout = mlp_from_json(j.at("readout"));
            detail::require(b.trunk.in_dim() == b.landmarks.indices.size() && b.readout.in_dim() == b.trunk.out_dim() &&
                                b.readout.out_dim() == readout_width(b.kind, b.dim),
                            "baseline checkpoint shapes do not chain");
            return b;
        }
        throw ValidationError("unknown checkpoint type '" + type + "'");
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed checkpoint: ") + e.what());
    }
}

inline Json to_json(const TrainConfig& c) {
    return {{"iterations", c.iterations},   {"batch_size", c.batch_size},     {"lr_initial", c.lr_initial},
            {"lr_final", c.lr_final},       {"weight_decay", c.weight_decay}, {"alpha", c.alpha},
            {"loss_form", to_string(c.loss_form)}, {"seed", c.seed},           {"head_kind", to_string(c.head_kind)}};
}

inline TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    try {
        c.iterations = j.value("iterations", c.iterations);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr_initial = j.value("lr_initial", c.lr_initial);
        c.lr_final = j.value("lr_final", c.lr_final);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.alpha = j.value("alpha", c.alpha);
        c.loss_form = loss_form_from_string(j.value("loss_form", to_string(c.loss_form)));
        c.seed = j.value("seed", c.seed);
        c.head_kind = head_kind_from_string(j.value("head_kind", to_string(c.head_kind)));
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed train config: ") + e.what());
    }
    validate(c);
    return c;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string loss_history_csv(const TrainReport& r) {
    std::string s = "iteration,loss,lr\n";
    for (std::size_t i = 0; i < r.loss_history.size(); ++i)
        s += std::to_string(i + 1) + "," + format_double(r.loss_history[i]) + "," + format_double(r.lr_history[i]) + "\n";
    return s;
}

inline Json summary_json(const DistortionReport& r) {
    return {{"pairs", r.pairs.size()},
            {"mean_rel_error", json_number(r.mean_rel_error)},
            {"max_rel_error", json_number(r.max_rel_error)},
            {"scale_s", json_number(r.scale_s)},
            {"distortion_D", json_number(r.distortion_D)}};
}

inline Json to_json(const DistortionReport& r) {
    Json j = summary_json(r);
    Json pairs = Json::array();
    for (const auto& p : r.pairs)
        pairs.push_back({{"i", p.i},
                         {"j", p.j},
                         {"original", p.original},
                         {"embedded", p.embedded},
                         {"ratio", p.ratio},
                         {"rel_error", p.rel_error}});
    j["pair_ratios"] = pairs;
    return j;
}

inline std::string to_csv(const DistortionReport& r) {
    std::string s = "i,j,original,embedded,ratio,rel_error\n";
    for (const auto& p : r.pairs)
        s += std::to_string(p.i) + "," + std::to_string(p.j) + "," + format_double(p.original) + "," +
             format_double(p.embedded) + "," + format_double(p.ratio) + "," + format_double(p.rel_error) + "\n";
    return s;
}

inline Json to_json(const PacCurve& c) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < c.distortion.size(); ++i)
        rows.push_back({{"D", json_number(c.distortion[i])}, {"fraction", c.fraction[i]}});
    return {{"curve", rows}};
}

inline std::string to_csv(const PacCurve& c) {
    std::string s = "D,fraction\n";
    for (std::size_t i = 0; i < c.distortion.size(); ++i)
        s += format_double(c.distortion[i]) + "," + format_double(c.fraction[i]) + "\n";
    return s;
}

inline std::string to_csv(const std::vector<PointError>& errors) {
    std::string s = "point,mean_rel_error,max_rel_error\n";
    for (const auto& e : errors)
        s += std::to_string(e.point) + "," + format_double(e.mean_rel_error) + "," + format_double(e.max_rel_error) + "\n";
    return s;
}

inline std::string to_csv(const BiasVector& b) {
    std::string s = "k,b\n";
    for (std::size_t k = 0; k < b.b.size(); ++k) s += std::to_string(k) + "," + format_double(b.b[k]) + "\n";
    return s;
}

inline std::string to_csv(const std::vector<SweepRow>& rows) {
    std::string s = "N,model,mean_test_rel_error\n";
    for (const auto& r : rows)
        for (const auto& [name, err] : r.mean_test_error)
            s += std::to_string(r.N) + "," + name + "," + format_double(err) + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// Densities

struct DensityOptions {
    std::size_t points = 512;
    double support_sigmas = 4.0;
    bool sigma_transform = false;  // sample with sigma -> log10(sigma + 2.1)
};

inline double displayed_std(double std, const DensityOptions& o) {
    return o.sigma_transform ? std::log10(std + 2.1) : std;
}

/// Samples every mixture's density on one shared grid over the combined support.
/// Zero-variance components cannot be sampled and are listed as atoms instead.
/// Rows: label,kind,x,value with kind "density" (value = pdf) or "atom" (value = weight).
inline std::string density_csv(const std::vector<LabelledMixture>& mixtures, const DensityOptions& o) {
    detail::require(o.points >= 2, "density grid needs at least two points");
    detail::require(o.support_sigmas > 0.0, "density support width must be positive");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& lm : mixtures) {
        validate(lm.mixture);
        for (const auto& c : lm.mixture.components) {
            const double s = c.gaussian.std > 0.0 ? displayed_std(c.gaussian.std, o) : 0.0;
            lo = std::min(lo, c.gaussian.mean - o.support_sigmas * s);
            hi = std::max(hi, c.gaussian.mean + o.support_sigmas * s);
        }
    }
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    std::string out = "label,kind,x,value\n";
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (const auto& lm : mixtures) {
        bool smooth = false;
        for (const auto& c : lm.mixture.components) {
            if (c.gaussian.std > 0.0) smooth = true;
            else out += lm.label + ",atom," + format_double(c.gaussian.mean) + "," + format_double(c.weight) + "\n";
        }
        if (!smooth) continue;
        for (std::size_t g = 0; g < o.points; ++g) {
            const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(o.points - 1);
            double pdf = 0.0;
            for (const auto& c : lm.mixture.components) {
                if (!(c.gaussian.std > 0.0)) continue;
                const double s = displayed_std(c.gaussian.std, o);
                const double z = (x - c.gaussian.mean) / s;
                pdf += c.weight * inv_sqrt_2pi / s * std::exp(-0.5 * z * z);
            }
            out += lm.label + ",density," + format_double(x) + "," + format_double(pdf) + "\n";
        }
    }
    return out;
}

}  // namespace mixembed
