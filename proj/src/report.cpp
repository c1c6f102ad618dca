#include "sla/report.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace sla {

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

bool RunReport::all_pass() const {
    return std::all_of(cases.begin(), cases.end(), [](const CheckCase& c) { return c.pass; });
}

void RunReport::add(std::string name, double observed, double threshold, std::string detail) {
    cases.push_back(
        {std::move(name), observed, threshold, observed <= threshold, std::move(detail)});
}

void RunReport::add_flag(std::string name, bool pass, std::string detail) {
    cases.push_back({std::move(name), pass ? 0.0 : 1.0, 0.0, pass, std::move(detail)});
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json j;
    j["suite"] = suite;
    j["all_pass"] = all_pass();
    j["elapsed_seconds"] = elapsed_seconds;
    j["cases"] = nlohmann::json::array();
    for (const auto& c : cases)
        j["cases"].push_back({{"name", c.name},
                              {"observed", c.observed},
                              {"threshold", c.threshold},
                              {"pass", c.pass},
                              {"detail", c.detail}});
    return j;
}

void RunReport::write_csv(std::ostream& os) const {
    os << "check,observed,threshold,pass,detail\n";
    os.precision(17);
    for (const auto& c : cases)
        os << csv_escape(c.name) << ',' << c.observed << ',' << c.threshold << ','
           << (c.pass ? "true" : "false") << ',' << csv_escape(c.detail) << '\n';
}

void RunReport::print(std::ostream& os) const {
    os << suite << "\n";
    for (const auto& c : cases) {
        os << "  [" << (c.pass ? "pass" : "FAIL") << "] " << std::left << std::setw(44)
           << c.name << " observed " << std::setprecision(6) << std::scientific << c.observed
           << "  threshold " << c.threshold << std::defaultfloat;
        if (!c.detail.empty()) os << "  (" << c.detail << ")";
        os << "\n";
    }
    os << (all_pass() ? "all checks passed" : "CHECK FAILURES PRESENT") << " ["
       << std::setprecision(3) << elapsed_seconds << "s]\n";
}

}  // namespace sla
