#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace sla {

// One named check with its observed worst value against a threshold.
struct CheckCase {
    std::string name;
    double observed = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string detail;
};

struct RunReport {
    std::string suite;
    std::vector<CheckCase> cases;
    double elapsed_seconds = 0.0;

    bool all_pass() const;
    void add(std::string name, double observed, double threshold, std::string detail = "");
    // adds with pass = predicate instead of observed <= threshold
    void add_flag(std::string name, bool pass, std::string detail = "");

    nlohmann::json to_json() const;
    // columns: check,observed,threshold,pass,detail
    void write_csv(std::ostream& os) const;
    void print(std::ostream& os) const;
};

}  // namespace sla
