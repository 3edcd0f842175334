#include "lpflow/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "lpflow/errors.hpp"

namespace lpflow {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

double number(const Json& j, const std::string& key, const std::string& where)
{
    if (!j.contains(key)) throw ConfigError("missing parameter '" + key + "' in " + where);
    if (!j.at(key).is_number()) throw ConfigError("'" + key + "' in " + where + " must be a number");
    return j.at(key).get<double>();
}

template <typename T>
void read_opt(const Json& j, const std::string& key, T& out, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("'" + key + "' in " + where + " has the wrong type");
    }
}

void read_size(const Json& j, const std::string& key, std::size_t& out, const std::string& where)
{
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("'" + key + "' in " + where + " must be a nonnegative integer");
    }
    out = v.get<std::size_t>();
}

}  // namespace

Json vector_to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const Json& j)
{
    if (!j.is_array()) throw ConfigError("expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError("expected an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Json matrix_to_json(const Matrix& m)
{
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
    return rows;
}

Matrix matrix_from_json(const Json& j)
{
    if (!j.is_array() || j.empty()) throw ConfigError("expected a nonempty array of rows");
    const std::size_t cols = j[0].size();
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Vector row = vector_from_json(j[r]);
        if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError("matrix rows have different lengths");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

VectorField field_from_json(const Json& j)
{
    if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
        throw ConfigError("field needs a string 'family'");
    }
    const std::string family = j.at("family").get<std::string>();
    const Json params = j.value("params", Json::object());
    if (family == "lorenz") {
        check_keys(j, {"family", "params"}, "field");
        check_keys(params, {"sigma", "rho", "beta"}, "lorenz params");
        return VectorField::lorenz(number(params, "sigma", "lorenz params"), number(params, "rho", "lorenz params"),
                                   number(params, "beta", "lorenz params"));
    }
    if (family == "rossler") {
        check_keys(j, {"family", "params"}, "field");
        check_keys(params, {"a", "b", "c"}, "rossler params");
        return VectorField::rossler(number(params, "a", "rossler params"), number(params, "b", "rossler params"),
                                    number(params, "c", "rossler params"));
    }
    if (family == "hopf_cylinder") {
        check_keys(j, {"family"}, "field");
        return VectorField::hopf_cylinder();
    }
    if (family == "planar_hopf") {
        check_keys(j, {"family"}, "field");
        return VectorField::planar_hopf();
    }
    if (family == "linear") {
        check_keys(j, {"family", "matrix"}, "field");
        if (!j.contains("matrix")) throw ConfigError("missing parameter 'matrix' in linear field");
        return VectorField::linear(matrix_from_json(j.at("matrix")));
    }
    if (family == "polynomial") {
        check_keys(j, {"family", "dimension", "terms", "singularities"}, "field");
        if (!j.contains("dimension") || !j.at("dimension").is_number_integer()) {
            throw ConfigError("missing parameter 'dimension' in polynomial field");
        }
        if (!j.contains("terms") || !j.at("terms").is_array()) throw ConfigError("missing parameter 'terms' in polynomial field");
        std::vector<PolynomialTerm> terms;
        for (const auto& t : j.at("terms")) {
            check_keys(t, {"component", "coefficient", "powers"}, "polynomial term");
            PolynomialTerm term;
            if (!t.contains("component") || !t.at("component").is_number_integer()) {
                throw ConfigError("polynomial term needs an integer 'component'");
            }
            term.component = t.at("component").get<int>();
            term.coefficient = number(t, "coefficient", "polynomial term");
            if (!t.contains("powers")) throw ConfigError("polynomial term needs 'powers'");
            read_opt(t, "powers", term.powers, "polynomial term");
            terms.push_back(std::move(term));
        }
        std::vector<Vector> sing;
        if (j.contains("singularities")) {
            for (const auto& s : j.at("singularities")) sing.push_back(vector_from_json(s));
        }
        return VectorField::polynomial(j.at("dimension").get<int>(), std::move(terms), std::move(sing));
    }
    throw ConfigError("unknown field family '" + family + "'");
}

Json field_to_json(const VectorField& f)
{
    Json j;
    j["family"] = f.family_name();
    switch (f.family()) {
    case FieldFamily::Lorenz:
    case FieldFamily::Rossler: {
        Json p = Json::object();
        for (const auto& [k, v] : f.params()) p[k] = v;
        j["params"] = p;
        break;
    }
    case FieldFamily::Linear: j["matrix"] = matrix_to_json(f.linear_matrix()); break;
    case FieldFamily::Polynomial: {
        j["dimension"] = f.dimension();
        Json terms = Json::array();
        for (const auto& t : f.terms()) {
            terms.push_back({{"component", t.component}, {"coefficient", t.coefficient}, {"powers", t.powers}});
        }
        j["terms"] = terms;
        Json sing = Json::array();
        for (const auto& s : f.singularities()) sing.push_back(vector_to_json(s));
        j["singularities"] = sing;
        break;
    }
    case FieldFamily::HopfCylinder: break;
    }
    return j;
}

IntegratorConfig integrator_from_json(const Json& j)
{
    const std::string where = "integrator";
    check_keys(j, {"method", "step", "abs_tol", "rel_tol", "box", "max_steps"}, where);
    IntegratorConfig c;
    if (j.contains("method")) {
        const std::string m = j.at("method").is_string() ? j.at("method").get<std::string>() : "";
        if (m == "rk45") c.method = Method::RK45;
        else if (m == "rk4") c.method = Method::RK4;
        else throw ConfigError("integrator method must be 'rk45' or 'rk4'");
    }
    read_opt(j, "step", c.step, where);
    read_opt(j, "abs_tol", c.abs_tol, where);
    read_opt(j, "rel_tol", c.rel_tol, where);
    read_opt(j, "max_steps", c.max_steps, where);
    if (j.contains("box")) {
        const Json& b = j.at("box");
        check_keys(b, {"lower", "upper"}, "integrator box");
        if (!b.contains("lower") || !b.contains("upper")) throw ConfigError("box needs 'lower' and 'upper'");
        c.box = Box{vector_from_json(b.at("lower")), vector_from_json(b.at("upper"))};
    }
    c.validate();
    return c;
}

Json integrator_to_json(const IntegratorConfig& c)
{
    Json j = {{"method", c.method == Method::RK45 ? "rk45" : "rk4"},
              {"step", c.step},
              {"abs_tol", c.abs_tol},
              {"rel_tol", c.rel_tol},
              {"max_steps", c.max_steps}};
    if (c.box.bounded()) j["box"] = {{"lower", vector_to_json(c.box.lower)}, {"upper", vector_to_json(c.box.upper)}};
    return j;
}

RunConfig config_from_json(const Json& j)
{
    check_keys(j,
               {"schema_version", "seed", "output_dir", "field", "integrator", "initial_point", "transient", "duration",
                "sample_dt", "block_time", "spectrum", "filtration", "domination", "pesin", "strings", "returns",
                "closing", "measures", "compare"},
               "config");
    if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion) {
        throw ConfigError("unsupported config schema_version");
    }
    RunConfig rc;
    PipelineSettings& p = rc.pipeline;
    if (!j.contains("field")) throw ConfigError("config needs a 'field'");
    p.field = field_from_json(j.at("field"));
    if (j.contains("integrator")) p.integrator = integrator_from_json(j.at("integrator"));
    if (j.contains("initial_point")) p.initial = vector_from_json(j.at("initial_point"));
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed must be a nonnegative integer");
        rc.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("output_dir")) rc.output_dir = j.at("output_dir").get<std::string>();
    read_opt(j, "transient", p.transient, "config");
    read_opt(j, "duration", p.duration, "config");
    read_opt(j, "sample_dt", p.sample_dt, "config");
    read_opt(j, "block_time", p.block_time, "config");

    if (j.contains("spectrum")) {
        const Json& s = j.at("spectrum");
        check_keys(s, {"burn_in", "min_tolerance", "exterior"}, "spectrum");
        read_opt(s, "burn_in", p.benettin.burn_in, "spectrum");
        read_opt(s, "min_tolerance", p.benettin.min_tolerance, "spectrum");
        read_opt(s, "exterior", rc.exterior_powers, "spectrum");
    }
    if (j.contains("filtration")) {
        check_keys(j.at("filtration"), {"window"}, "filtration");
        read_size(j.at("filtration"), "window", p.filtration.window, "filtration");
    }
    if (j.contains("domination")) {
        const Json& d = j.at("domination");
        check_keys(d, {"max_window", "slack", "cone_samples"}, "domination");
        read_size(d, "max_window", rc.domination.max_window, "domination");
        read_opt(d, "slack", rc.domination.slack, "domination");
        read_opt(d, "cone_samples", rc.cone_samples, "domination");
    }
    if (j.contains("pesin")) {
        const Json& s = j.at("pesin");
        check_keys(s, {"eta", "C", "horizon"}, "pesin");
        read_opt(s, "eta", p.pesin.eta, "pesin");
        read_opt(s, "C", p.pesin.C, "pesin");
        read_size(s, "horizon", p.pesin.horizon, "pesin");
    }
    if (j.contains("strings")) {
        const Json& s = j.at("strings");
        check_keys(s, {"eta", "gap"}, "strings");
        read_opt(s, "eta", p.string_eta, "strings");
        read_opt(s, "gap", p.string_gap, "strings");
    }
    if (j.contains("returns")) {
        const Json& s = j.at("returns");
        check_keys(s, {"D_rel", "min_return_time", "max_return_time", "max_candidates"}, "returns");
        read_opt(s, "D_rel", p.D_rel, "returns");
        read_opt(s, "min_return_time", p.min_return_time, "returns");
        read_opt(s, "max_return_time", p.max_return_time, "returns");
        read_size(s, "max_candidates", p.max_candidates, "returns");
    }
    if (j.contains("closing")) {
        const Json& s = j.at("closing");
        check_keys(s, {"eps", "nodes", "max_iter", "tolerance", "closure_tolerance", "period_window", "max_closures"},
                   "closing");
        read_opt(s, "eps", p.shadow_eps, "closing");
        read_size(s, "nodes", p.closing.nodes, "closing");
        read_opt(s, "max_iter", p.closing.max_iter, "closing");
        read_opt(s, "tolerance", p.closing.tolerance, "closing");
        read_opt(s, "closure_tolerance", p.closing.closure_tolerance, "closing");
        read_opt(s, "period_window", p.closing.period_window, "closing");
        read_size(s, "max_closures", p.max_closures, "closing");
    }
    if (j.contains("measures")) {
        check_keys(j.at("measures"), {"family_size"}, "measures");
        read_size(j.at("measures"), "family_size", p.family_size, "measures");
    }
    if (j.contains("compare")) {
        const Json& s = j.at("compare");
        check_keys(s, {"eps", "weak_eps", "measure", "orbits", "tiers"}, "compare");
        read_opt(s, "eps", rc.compare_eps, "compare");
        read_opt(s, "weak_eps", rc.weak_eps, "compare");
        read_opt(s, "measure", rc.measure_file, "compare");
        read_opt(s, "orbits", rc.orbit_files, "compare");
        read_opt(s, "tiers", rc.period_tiers, "compare");
    }
    p.validate();
    if (!(rc.compare_eps > 0.0) || !(rc.weak_eps > 0.0)) throw ConfigError("compare eps values must be positive");
    if (rc.cone_samples < 1) throw ConfigError("cone_samples must be positive");
    if (!std::is_sorted(rc.period_tiers.begin(), rc.period_tiers.end())) throw ConfigError("period tiers must be ascending");
    for (int n : rc.exterior_powers) {
        if (n < 1 || n > p.field.dimension() - 1) throw ConfigError("exterior power out of range");
    }
    return rc;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

Json spectrum_to_json(const LyapunovSpectrum& s)
{
    Json groups = Json::array();
    for (std::size_t g = 0; g < s.groups(); ++g) {
        groups.push_back({{"value", s.values[g]}, {"multiplicity", s.multiplicities[g]}});
    }
    return {{"exponents", s.exponents}, {"std_errors", s.std_errors}, {"groups", groups},
            {"min_gap", s.min_gap},     {"tolerance", s.tolerance},   {"index", index_of(s)}};
}

std::vector<double> exponents_from_json(const Json& j)
{
    const Json* src = &j;
    if (j.contains("spectrum") && j.at("spectrum").is_object()) src = &j.at("spectrum");
    if (!src->contains("exponents")) throw ConfigError("file has no 'exponents'");
    const Vector v = vector_from_json(src->at("exponents"));
    return {v.data(), v.data() + v.size()};
}

Json cocycle_to_json(const CocycleSequence& c)
{
    Json blocks = Json::array();
    for (const auto& b : c.blocks) blocks.push_back(matrix_to_json(b));
    Json meta = Json::object();
    if (c.has_points()) {
        Json pts = Json::array();
        for (const auto& p : c.points) pts.push_back(vector_to_json(p));
        meta["points"] = pts;
        meta["speeds"] = c.speeds;
        Json dist = Json::array();
        for (double d : c.singularity_distances) dist.push_back(std::isfinite(d) ? Json(d) : Json(nullptr));
        meta["singularity_distances"] = dist;  // null = no declared singularity
    }
    return {{"schema_version", kSchemaVersion}, {"T", c.step}, {"blocks", blocks}, {"meta", meta}};
}

CocycleSequence cocycle_from_json(const Json& j)
{
    check_keys(j, {"schema_version", "T", "blocks", "meta"}, "cocycle");
    CocycleSequence c;
    c.step = number(j, "T", "cocycle");
    if (!j.contains("blocks") || !j.at("blocks").is_array()) throw ConfigError("cocycle needs 'blocks'");
    for (const auto& b : j.at("blocks")) c.blocks.push_back(matrix_from_json(b));
    if (j.contains("meta") && j.at("meta").contains("points")) {
        const Json& m = j.at("meta");
        for (const auto& p : m.at("points")) c.points.push_back(vector_from_json(p));
        for (const auto& s : m.at("speeds")) c.speeds.push_back(s.get<double>());
        for (const auto& d : m.at("singularity_distances")) {
            c.singularity_distances.push_back(d.is_null() ? std::numeric_limits<double>::infinity() : d.get<double>());
        }
        if (!c.has_points() || c.speeds.size() != c.points.size() || c.singularity_distances.size() != c.points.size()) {
            throw ConfigError("cocycle meta does not match the block count");
        }
    }
    c.validate();
    return c;
}

Json domination_to_json(const DominationReport& r)
{
    return {{"satisfied", r.satisfied},   {"lambda", r.lambda},
            {"constant", r.constant},     {"tail_rate", r.tail_rate},
            {"window_times", r.window_times}, {"worst_log_ratio", r.worst_log_ratio}};
}

Json certificate_to_json(const StringCertificate& c)
{
    return {{"start_block", c.start},
            {"gap_blocks", c.gap_blocks},
            {"eta", c.eta},
            {"times", c.times},
            {"stable_norms", c.stable_norms},
            {"unstable_conorms", c.unstable_conorms},
            {"contraction_margins", c.contraction_margins},
            {"expansion_margins", c.expansion_margins},
            {"ratio_margins", c.ratio_margins}};
}

Json candidate_to_json(const ReturnCandidate& c, std::size_t id, const Trajectory& traj)
{
    return {{"id", id},
            {"i", c.i},
            {"j", c.j},
            {"t_i", traj.times.at(c.i)},
            {"t_j", traj.times.at(c.j)},
            {"abs_gap", c.abs_gap},
            {"rel_gap", c.rel_gap}};
}

ReturnCandidate candidate_from_json(const Json& j)
{
    ReturnCandidate c;
    if (!j.contains("i") || !j.contains("j")) throw ConfigError("candidate needs 'i' and 'j'");
    c.i = j.at("i").get<std::size_t>();
    c.j = j.at("j").get<std::size_t>();
    c.abs_gap = j.value("abs_gap", 0.0);
    c.rel_gap = j.value("rel_gap", 0.0);
    return c;
}

Json orbit_to_json(const PeriodicOrbit& o)
{
    Json nodes = Json::array();
    for (const auto& z : o.nodes) nodes.push_back(vector_to_json(z));
    return {{"point", vector_to_json(o.point)},
            {"period", o.period},
            {"closure_residual", o.closure_residual},
            {"shooting_defect", o.shooting_defect},
            {"diameter", o.diameter},
            {"iterations", o.iterations},
            {"residual_history", o.residual_history},
            {"nodes", nodes},
            {"flight_times", o.flight_times}};
}

Json shadowing_to_json(const ShadowingReport& r)
{
    return {{"pass", r.pass},
            {"eps", r.eps},
            {"max_relative_distance", r.max_relative_distance},
            {"min_slope", r.min_slope},
            {"max_slope", r.max_slope},
            {"distance_ok", r.distance_ok},
            {"slope_ok", r.slope_ok},
            {"grid_points", r.grid_points}};
}

Json comparison_to_json(const ComparisonReport& r)
{
    auto extreme = [](const ExtremeComparison& e) {
        return Json{{"measure_exponent", e.measure_exponent},
                    {"orbit_exponent", e.orbit_exponent},
                    {"gap", e.gap},
                    {"pass", e.pass}};
    };
    Json j = {{"measure_spectrum", r.measure_spectrum},
              {"orbit_spectrum", r.orbit_spectrum},
              {"gaps", r.gaps},
              {"eps", r.eps},
              {"spectrum_pass", r.spectrum_pass},
              {"largest_exponent", extreme(r.largest)},
              {"smallest_exponent", extreme(r.smallest)}};
    if (r.weak_star) {
        j["weak_star_distance"] = *r.weak_star;
        j["weak_star_eps"] = *r.weak_star_eps;
        j["weak_star_pass"] = *r.weak_star_pass;
    }
    return j;
}

void write_json(const std::filesystem::path& path, const Json& j)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + " is not valid JSON: " + e.what());
    }
}

}  // namespace lpflow
