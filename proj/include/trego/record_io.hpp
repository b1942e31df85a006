#pragma once

#include <cstdio>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trego/engine.hpp"
#include "trego/errors.hpp"

namespace trego::io {

using nlohmann::json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename Enum>
Enum parse_enum(const std::string& s, std::initializer_list<Enum> candidates, const char* what) {
    for (auto c : candidates)
        if (to_string(c) == s) return c;
    throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

inline json to_json(const TregoConfig& c) {
    return {
        {"beta", c.beta},
        {"gamma", c.gamma},
        {"sigma0", c.sigma0},
        {"d_min", c.d_min},
        {"d_max", c.d_max},
        {"G", c.global_steps},
        {"L", c.local_steps},
        {"forcing", {{"c", c.forcing.c}, {"q", c.forcing.q}}},
        {"tr_norm", std::string(to_string(c.tr_norm))},
        {"local_model", std::string(to_string(c.local_model))},
        {"local_acquisition", std::string(to_string(c.local_acquisition))},
        {"budget", c.budget},
        {"mode", std::string(to_string(c.mode))},
        {"fit",
         {{"lengthscale_min", c.fit.lengthscale_min},
          {"lengthscale_max", c.fit.lengthscale_max},
          {"signal_variance_min_factor", c.fit.signal_variance_min_factor},
          {"signal_variance_max_factor", c.fit.signal_variance_max_factor},
          {"starts", c.fit.starts},
          {"max_iterations", c.fit.optimizer.max_iterations},
          {"jitter_initial", c.fit.jitter.initial_relative},
          {"jitter_max", c.fit.jitter.max_relative}}},
        {"acquisition",
         {{"starts_per_dim", c.acquisition.starts_per_dim},
          {"lcb_kappa", c.acquisition.lcb_kappa},
          {"max_iterations", c.acquisition.optimizer.max_iterations},
          {"gradient_tolerance", c.acquisition.optimizer.gradient_tolerance}}},
    };
}

/// Inverse of to_json; missing keys keep the values already in `base`.
inline TregoConfig config_from_json(const json& j, TregoConfig base = {}) {
    TregoConfig c = std::move(base);
    auto get = [&](const json& obj, const char* key, auto& field) {
        if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    get(j, "beta", c.beta);
    get(j, "gamma", c.gamma);
    get(j, "sigma0", c.sigma0);
    get(j, "d_min", c.d_min);
    get(j, "d_max", c.d_max);
    get(j, "G", c.global_steps);
    get(j, "L", c.local_steps);
    get(j, "budget", c.budget);
    if (j.contains("forcing")) {
        get(j["forcing"], "c", c.forcing.c);
        get(j["forcing"], "q", c.forcing.q);
    }
    if (j.contains("tr_norm"))
        c.tr_norm = parse_enum<Norm>(j["tr_norm"].get<std::string>(), {Norm::linf, Norm::l1, Norm::l2}, "norm");
    if (j.contains("local_model"))
        c.local_model = parse_enum<LocalModel>(j["local_model"].get<std::string>(),
                                               {LocalModel::shared, LocalModel::local}, "local model");
    if (j.contains("local_acquisition"))
        c.local_acquisition = parse_enum<AcquisitionKind>(
            j["local_acquisition"].get<std::string>(),
            {AcquisitionKind::expected_improvement, AcquisitionKind::posterior_mean,
             AcquisitionKind::lower_confidence_bound},
            "acquisition");
    if (j.contains("mode"))
        c.mode = parse_enum<Mode>(j["mode"].get<std::string>(), {Mode::trego, Mode::ego}, "mode");
    if (j.contains("fit")) {
        const auto& f = j["fit"];
        get(f, "lengthscale_min", c.fit.lengthscale_min);
        get(f, "lengthscale_max", c.fit.lengthscale_max);
        get(f, "signal_variance_min_factor", c.fit.signal_variance_min_factor);
        get(f, "signal_variance_max_factor", c.fit.signal_variance_max_factor);
        get(f, "starts", c.fit.starts);
        get(f, "max_iterations", c.fit.optimizer.max_iterations);
        get(f, "jitter_initial", c.fit.jitter.initial_relative);
        get(f, "jitter_max", c.fit.jitter.max_relative);
    }
    if (j.contains("acquisition")) {
        const auto& a = j["acquisition"];
        get(a, "starts_per_dim", c.acquisition.starts_per_dim);
        get(a, "lcb_kappa", c.acquisition.lcb_kappa);
        get(a, "max_iterations", c.acquisition.optimizer.max_iterations);
        get(a, "gradient_tolerance", c.acquisition.optimizer.gradient_tolerance);
    }
    return c;
}

/// Columns: t, k, phase, x_1..x_n, f, sigma, success.
inline void write_csv(const RunRecord& rec, std::ostream& os) {
    os << "t,k,phase";
    for (int i = 1; i <= rec.dim; ++i) os << ",x_" << i;
    os << ",f,sigma,success\n";
    for (const auto& r : rec.rows) {
        os << r.t << ',' << r.k << ',' << to_string(r.phase);
        for (Eigen::Index i = 0; i < r.x.size(); ++i) os << ',' << format_double(r.x[i]);
        os << ',' << format_double(r.f) << ',' << format_double(r.sigma) << ',' << (r.success ? 1 : 0) << '\n';
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Reads rows written by write_csv; returns the dimension through `dim`.
inline std::vector<RunRow> read_csv(std::istream& is, int& dim) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty run CSV");
    const auto header = split_csv_line(line);
    if (header.size() < 7 || header[0] != "t" || header[1] != "k" || header[2] != "phase")
        throw ConfigError("unexpected run CSV header");
    dim = static_cast<int>(header.size()) - 6;
    std::vector<RunRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw ConfigError("ragged run CSV row");
        RunRow r;
        r.t = std::stoi(cells[0]);
        r.k = std::stoi(cells[1]);
        r.phase = parse_phase(cells[2]);
        r.x.resize(dim);
        for (int i = 0; i < dim; ++i) r.x[i] = std::stod(cells[3 + i]);
        r.f = std::stod(cells[3 + dim]);
        r.sigma = std::stod(cells[4 + dim]);
        r.success = cells[5 + dim] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Sidecar: config echo, seed, per-iteration bookkeeping and per-row model digests.
inline json sidecar_json(const RunRecord& rec) {
    json iterations = json::array();
    for (const auto& it : rec.iterations)
        iterations.push_back({{"k", it.k},
                              {"sigma", it.sigma},
                              {"f_star", it.f_star},
                              {"incumbent_t", it.incumbent_t},
                              {"success", it.success},
                              {"phase", std::string(to_string(it.decided_in))},
                              {"t_end", it.t_end}});
    json models = json::array();
    for (const auto& r : rec.rows) {
        if (!r.model) {
            models.push_back(nullptr);
            continue;
        }
        models.push_back({{"lengthscales", to_std(r.model->lengthscales)},
                          {"signal_variance", r.model->signal_variance},
                          {"trend", r.model->trend},
                          {"jitter", r.model->jitter}});
    }
    return {{"format", "trego-run/1"},
            {"dim", rec.dim},
            {"seed", rec.seed},
            {"config", to_json(rec.config)},
            {"iterations", iterations},
            {"models", models},
            {"final_sigma", rec.final_sigma},
            {"final_f_star", rec.final_f_star},
            {"final_incumbent_t", rec.final_incumbent_t},
            {"aborted", rec.aborted},
            {"abort_reason", rec.abort_reason}};
}

inline RunRecord record_from(const json& sidecar, std::vector<RunRow> rows, int dim) {
    RunRecord rec;
    rec.dim = dim;
    rec.seed = sidecar.value("seed", std::uint64_t{0});
    rec.config = config_from_json(sidecar.at("config"));
    rec.rows = std::move(rows);
    for (const auto& it : sidecar.at("iterations"))
        rec.iterations.push_back(IterationRecord{it.at("k").get<int>(), it.at("sigma").get<double>(),
                                                 it.at("f_star").get<double>(), it.at("incumbent_t").get<int>(),
                                                 it.at("success").get<bool>(), parse_phase(it.at("phase").get<std::string>()),
                                                 it.at("t_end").get<int>()});
    if (sidecar.contains("models")) {
        const auto& models = sidecar["models"];
        for (std::size_t i = 0; i < rec.rows.size() && i < models.size(); ++i) {
            if (models[i].is_null()) continue;
            rec.rows[i].model = ModelDigest{to_eigen(models[i].at("lengthscales").get<std::vector<double>>()),
                                            models[i].at("signal_variance").get<double>(),
                                            models[i].at("trend").get<double>(), models[i].at("jitter").get<double>()};
        }
    }
    rec.final_sigma = sidecar.at("final_sigma").get<double>();
    rec.final_f_star = sidecar.at("final_f_star").get<double>();
    rec.final_incumbent_t = sidecar.value("final_incumbent_t", 0);
    rec.aborted = sidecar.value("aborted", false);
    rec.abort_reason = sidecar.value("abort_reason", std::string{});
    return rec;
}

}  // namespace trego::io
