#include "qpr/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qpr::io {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

static json ivec_to_json(const VecXi& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json to_json(const Mat2& m) {
    return json::array({fmt17(m(0, 0)), fmt17(m(0, 1)), fmt17(m(1, 0)), fmt17(m(1, 1))});
}

json torus_to_json(const TorusMap& f) {
    json j;
    j["d"] = f.dim();
    j["n"] = f.order();
    j["den"] = f.den();
    j["radius"] = fmt17(f.radius());
    json coeffs = json::array();
    for (std::size_t i = 0; i < f.table_size(); ++i) {
        const Mat2c& c = f.coeff_flat(i);
        if (c.cwiseAbs().maxCoeff() == 0.0) continue;
        json entry;
        entry["k"] = ivec_to_json(f.index_of(i));
        json re = json::array(), im = json::array();
        for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s) {
                re.push_back(fmt17(c(r, s).real()));
                im.push_back(fmt17(c(r, s).imag()));
            }
        entry["re"] = re;
        entry["im"] = im;
        coeffs.push_back(entry);
    }
    j["coeffs"] = coeffs;
    return j;
}

TorusMap torus_from_json(const json& j) {
    TorusMap f(j.at("d").get<int>(), j.at("n").get<int>(), j.at("den").get<int>(),
               std::stod(j.at("radius").get<std::string>()));
    for (const auto& entry : j.at("coeffs")) {
        const auto& kj = entry.at("k");
        VecXi k(static_cast<int>(kj.size()));
        for (int i = 0; i < k.size(); ++i) k(i) = kj[i].get<int>();
        if (!f.in_box(k)) throw std::invalid_argument("torus_from_json: index outside box");
        Mat2c c;
        const auto& re = entry.at("re");
        const auto& im = entry.at("im");
        for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s)
                c(r, s) = cplx(std::stod(re[2 * r + s].get<std::string>()),
                               std::stod(im[2 * r + s].get<std::string>()));
        f.coeff(k) = c;
    }
    return f;
}

json to_json(const ReducedForm& rf) {
    json j;
    j["kind"] = rf.kind_name();
    j["value"] = fmt17(rf.value);
    return j;
}

json to_json(const KamTranscript& tr) {
    json j;
    j["converged"] = tr.converged;
    j["final_residual"] = fmt17(tr.final_residual);
    j["label"] = ivec_to_json(tr.label);
    j["b"] = to_json(tr.b);
    j["diagnostic"] = tr.diagnostic;
    json steps = json::array();
    for (const auto& s : tr.steps) {
        json sj;
        sj["index"] = s.index;
        sj["resonant"] = s.resonant;
        sj["n"] = ivec_to_json(s.n);
        sj["z_norm"] = fmt17(s.z_norm);
        sj["a_shift"] = fmt17(s.a_shift);
        sj["f_next_norm"] = fmt17(s.f_next_norm);
        sj["a_next"] = to_json(s.a_next);
        steps.push_back(sj);
    }
    j["steps"] = steps;
    return j;
}

json to_json(const GapRecord& g) {
    json j;
    j["label"] = ivec_to_json(g.label);
    j["a"] = fmt17(g.a);
    j["b"] = fmt17(g.b);
    j["plateau"] = fmt17(g.plateau);
    j["length"] = fmt17(g.length());
    return j;
}

json to_json(const std::vector<GapRecord>& gaps) {
    json a = json::array();
    for (const auto& g : gaps) a.push_back(to_json(g));
    return a;
}

json to_json(const EmbeddingResult& r) {
    json j;
    j["iterations"] = r.iterations;
    j["residual"] = fmt17(r.residual);
    j["norm_ratio"] = fmt17(r.norm_ratio);
    j["c_measured"] = fmt17(r.c_measured);
    j["f"] = torus_to_json(r.f);
    return j;
}

json to_json(const GrowthLaw& g) {
    json j;
    j["kind"] = g.kind_name();
    j["param"] = fmt17(g.param);
    return j;
}

json to_json(const GrowthFit& g) {
    json j;
    j["kind"] = GrowthLaw{g.kind, g.param}.kind_name();
    j["param"] = fmt17(g.param);
    j["r2"] = fmt17(g.r2);
    return j;
}

std::string curve_csv(const std::vector<SweepPoint>& curve, unsigned seed) {
    std::ostringstream out;
    out << "# seed=" << seed << "\n";
    out << "e,rho,lyap,rho_err,rho_ok,lyap_ok\n";
    for (const auto& p : curve)
        out << fmt17(p.e) << ',' << fmt17(p.rho) << ',' << fmt17(p.lyap) << ','
            << fmt17(p.rho_err) << ',' << (p.rho_ok ? 1 : 0) << ',' << (p.lyap_ok ? 1 : 0)
            << '\n';
    return out.str();
}

std::string traces_csv(const std::vector<SobolevTrace>& traces, unsigned seed) {
    if (traces.empty()) throw std::invalid_argument("traces_csv: no traces");
    const auto& t0 = traces.front();
    for (const auto& tr : traces)
        if (tr.t != t0.t) throw std::invalid_argument("traces_csv: mismatched time grids");
    std::ostringstream out;
    out << "# seed=" << seed << "\n";
    out << "t";
    for (const auto& tr : traces) out << ",norm_s" << fmt17(tr.s);
    out << ",tail_mass,trusted\n";
    for (std::size_t i = 0; i < t0.t.size(); ++i) {
        out << fmt17(t0.t[i]);
        for (const auto& tr : traces) out << ',' << fmt17(tr.norm[i]);
        out << ',' << fmt17(t0.tail[i]) << ',' << (t0.trusted[i] ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace qpr::io
