#include "drccmdp/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace drccmdp {

using nlohmann::json;

MdpModel mdp_from_json(const std::string& text) {
    const json j = json::parse(text);
    const std::size_t n = j.at("n_states").get<std::size_t>();
    auto labels = j.at("actions").get<std::vector<std::vector<std::string>>>();
    const prec_t alpha = j.at("alpha").get<prec_t>();
    const vec gamma = j.at("gamma").get<vec>();
    MdpModel mdp(n, std::move(labels), alpha, gamma);
    for (const auto& row : j.at("transition")) {
        if (!row.is_array() || row.size() != 4)
            throw std::invalid_argument("mdp json: transition entries are [s,a,s',p]");
        mdp.set_transition(row[0].get<std::size_t>(), row[1].get<std::size_t>(),
                           row[2].get<std::size_t>(), row[3].get<prec_t>());
    }
    mdp.validate();
    return mdp;
}

std::string mdp_to_json(const MdpModel& mdp) {
    json j;
    j["n_states"] = mdp.n_states();
    std::vector<std::vector<std::string>> labels;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) labels.push_back(mdp.action_labels(s));
    j["actions"] = labels;
    j["alpha"] = mdp.discount();
    j["gamma"] = mdp.initial();
    json tr = json::array();
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(s); ++a)
            for (const auto& [sp, p] : mdp.transitions_from(s, a))
                tr.push_back({s, a, sp, p});
    j["transition"] = tr;
    return j.dump(2);
}

namespace {

Matrix matrix_from_json(const json& j) {
    const auto rows = j.get<std::vector<vec>>();
    if (rows.empty()) return Matrix();
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols())
            throw std::invalid_argument("matrix json: ragged rows");
        for (std::size_t k = 0; k < m.cols(); ++k) m(i, k) = rows[i][k];
    }
    return m;
}

SupportKind support_from_string(const std::string& s) {
    if (s == "full") return SupportKind::full;
    if (s == "nonneg" || s == "nonnegative") return SupportKind::nonnegative;
    throw std::invalid_argument("ambiguity json: support must be full or nonneg");
}

}  // namespace

AmbiguitySpec ambiguity_from_json(const std::string& text) {
    const json j = json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "nominal") return NominalSpec{j.at("reward").get<vec>()};
    if (kind == "gaussian")
        return GaussianSpec{j.at("mu").get<vec>(), matrix_from_json(j.at("sigma")),
                            j.at("epsilon").get<prec_t>()};
    if (kind == "D1" || kind == "D2" || kind == "D3") {
        MomentAmbiguity a;
        a.kind = kind == "D1" ? MomentKind::d1 : kind == "D2" ? MomentKind::d2 : MomentKind::d3;
        a.mu = j.at("mu").get<vec>();
        a.sigma = matrix_from_json(j.at("sigma"));
        if (j.contains("delta0")) a.delta0 = j.at("delta0").get<prec_t>();
        if (j.contains("delta1")) a.delta1 = j.at("delta1").get<prec_t>();
        if (j.contains("delta2")) a.delta2 = j.at("delta2").get<prec_t>();
        a.support = support_from_string(j.value("support", "full"));
        a.epsilon = j.at("epsilon").get<prec_t>();
        a.validate();
        return a;
    }
    if (kind == "phi") {
        PhiAmbiguity a;
        const std::string d = j.at("divergence").get<std::string>();
        if (d == "kl") a.divergence = PhiDivergence::kullback_leibler;
        else if (d == "variation") a.divergence = PhiDivergence::variation;
        else if (d == "mchi2") a.divergence = PhiDivergence::modified_chi2;
        else if (d == "hellinger") a.divergence = PhiDivergence::hellinger;
        else throw std::invalid_argument("ambiguity json: unknown divergence " + d);
        a.theta = j.at("theta").get<prec_t>();
        a.epsilon = j.at("epsilon").get<prec_t>();
        a.mu_nu = j.at("mu_nu").get<vec>();
        a.sigma_nu = matrix_from_json(j.at("sigma_nu"));
        a.validate();
        return a;
    }
    if (kind == "wasserstein") {
        WassersteinAmbiguity a;
        a.theta = j.at("theta").get<prec_t>();
        a.epsilon = j.at("epsilon").get<prec_t>();
        a.support = support_from_string(j.value("support", "full"));
        if (j.contains("order")) a.order = j.at("order").get<int>();
        a.scenarios = scenarios_from_csv(read_file(j.at("scenarios_csv").get<std::string>()));
        a.validate();
        return a;
    }
    throw std::invalid_argument("ambiguity json: unknown kind " + kind);
}

std::string scenarios_to_csv(const ScenarioSet& set, const std::vector<std::string>& labels) {
    if (labels.size() != set.dim())
        throw std::invalid_argument("scenarios_to_csv: one label per column required");
    std::ostringstream out;
    for (std::size_t k = 0; k < labels.size(); ++k)
        out << labels[k] << (k + 1 < labels.size() ? ',' : '\n');
    char buf[40];
    for (std::size_t i = 0; i < set.count(); ++i) {
        for (std::size_t k = 0; k < set.dim(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", set.data(i, k));
            out << buf << (k + 1 < set.dim() ? ',' : '\n');
        }
    }
    return out.str();
}

ScenarioSet scenarios_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("scenario csv: empty input");
    std::size_t ncols = 1;
    for (char c : line)
        if (c == ',') ++ncols;
    std::vector<vec> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        vec row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != ncols)
            throw std::invalid_argument("scenario csv: row width does not match header");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("scenario csv: no scenario rows");
    ScenarioSet set;
    set.data = Matrix(rows.size(), ncols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < ncols; ++k) set.data(i, k) = rows[i][k];
    set.generator = "csv";
    return set;
}

std::string solution_to_json(const DrccmdpSolution& sol) {
    json j;
    j["status"] = to_string(sol.status);
    j["y"] = sol.y;
    j["rho"] = sol.rho;
    json pol = json::array();
    for (const auto& row : sol.policy.probs) pol.push_back(row);
    j["policy"] = pol;
    j["iterations"] = sol.iterations;
    j["nodes"] = sol.nodes;
    j["rounds"] = sol.rounds;
    j["lambda_opt"] = sol.lambda_opt;
    j["wall_seconds"] = sol.wall_seconds;
    j["certified"] = sol.certified;
    j["message"] = sol.message;
    j["warnings"] = sol.warnings;
    return j.dump(2);
}

DrccmdpSolution solution_from_json(const std::string& text) {
    const json j = json::parse(text);
    DrccmdpSolution sol;
    const std::string st = j.at("status").get<std::string>();
    if (st == "optimal") sol.status = SolveStatus::optimal;
    else if (st == "infeasible") sol.status = SolveStatus::infeasible;
    else if (st == "unbounded") sol.status = SolveStatus::unbounded;
    else if (st == "node-limit") sol.status = SolveStatus::node_limit;
    else sol.status = SolveStatus::numerical_failure;
    sol.y = j.at("y").get<prec_t>();
    sol.rho = j.at("rho").get<vec>();
    for (const auto& row : j.at("policy")) sol.policy.probs.push_back(row.get<vec>());
    sol.certified = j.value("certified", true);
    sol.message = j.value("message", std::string());
    return sol;
}

std::string report_to_json(const ValidationReport& rep) {
    json j;
    if (rep.empirical_violation) j["empirical_violation"] = *rep.empirical_violation;
    if (rep.worst_case) j["worst_case"] = *rep.worst_case;
    j["slack"] = rep.slack;
    j["pass"] = rep.pass;
    j["supported"] = rep.supported;
    j["samples"] = rep.samples;
    j["seed"] = rep.seed;
    j["oracle"] = rep.oracle;
    if (!rep.note.empty()) j["note"] = rep.note;
    return j.dump(2);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

}  // namespace drccmdp
