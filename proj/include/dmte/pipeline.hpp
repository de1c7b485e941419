#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmte/csv.hpp"
#include "dmte/market.hpp"
#include "dmte/mte.hpp"

// Panel transformations: raw person-year CSV -> estimation sample with lags,
// health shocks, the intensive-margin outcome, treatment indicators,
// deductible switching groups, the market-premium instrument, and the
// stable-characteristics and strata filters. Every row that leaves the
// sample is accounted for in a drop ledger.

namespace dmte::pipe {

enum class Employment { Active, Unemployed, Nilf };

inline std::string to_string(Employment e) {
    switch (e) {
        case Employment::Active: return "active";
        case Employment::Unemployed: return "unemployed";
        default: return "nilf";
    }
}

inline Employment parse_employment(const std::string& s) {
    if (s == "active") return Employment::Active;
    if (s == "unemployed") return Employment::Unemployed;
    if (s == "nilf") return Employment::Nilf;
    throw std::invalid_argument("unknown employment code: " + s);
}

enum class SwitchGroup { NoSwitch, StrongDrop, MildDrop, MildIncrease, StrongIncrease };

inline std::string to_string(SwitchGroup g) {
    switch (g) {
        case SwitchGroup::NoSwitch: return "no_switch";
        case SwitchGroup::StrongDrop: return "strong_drop";
        case SwitchGroup::MildDrop: return "mild_drop";
        case SwitchGroup::MildIncrease: return "mild_increase";
        default: return "strong_increase";
    }
}

enum class TreatmentSide { Lowest, Highest };

inline std::string to_string(TreatmentSide s) {
    return s == TreatmentSide::Lowest ? "lowest" : "highest";
}

inline TreatmentSide parse_treatment_side(const std::string& s) {
    if (s == "lowest") return TreatmentSide::Lowest;
    if (s == "highest") return TreatmentSide::Highest;
    throw std::invalid_argument("treatment side must be lowest or highest: " + s);
}

struct PanelRecord {
    std::int64_t person_id = 0;
    int year = 0;
    int canton = 0;
    int age = 0;
    int gender = 0;  // 1 = woman
    int educ_years = 0;
    int hh_size = 1;
    double income_pm = 0.0;
    Employment employment = Employment::Active;
    bool subsidy = false;
    bool suppl_ins = false;
    int deductible = 300;
    market::PlanType plan_type = market::PlanType::Free;
    int visits = 0;
    int self_health = 3;  // 1 (very well) .. 5 (not well at all)
    bool illness = false;
    bool chronic = false;
    bool smoke = false;
    bool phys_act = false;
    int med_need = 0;  // 0..10
};

struct EstimationRow {
    PanelRecord cur;
    // previous-wave values
    int lag_visits = 0;
    int lag_self_health = 3;
    bool lag_illness = false;
    bool lag_chronic = false;
    bool lag_smoke = false;
    bool lag_phys_act = false;
    int lag_med_need = 0;
    int lag_deductible = 300;
    // derived
    bool health_shock = false;
    bool has_log_visits = false;
    double log_visits = 0.0;
    int treatment = 0;
    double avg_premium = 0.0;
    SwitchGroup switching = SwitchGroup::NoSwitch;
    bool stable = false;
};

struct DropLedger {
    struct Entry {
        std::string stage;
        int row_number = 0;  // 0 when the drop is not tied to a source row
        std::int64_t person_id = 0;
        int year = 0;
        std::string reason;
    };
    std::vector<Entry> entries;

    void add(const std::string& stage, int row, std::int64_t person, int year,
             const std::string& reason) {
        entries.push_back({stage, row, person, year, reason});
    }

    int count(const std::string& stage) const {
        int c = 0;
        for (const auto& e : entries)
            if (e.stage == stage) ++c;
        return c;
    }
};

inline const std::vector<std::string> kPanelColumns{
    "person_id", "year",   "canton",     "age",    "gender",  "educ_years", "hh_size",
    "income_pm", "employment", "subsidy", "suppl_ins", "deductible", "plan_type",
    "visits",    "self_health", "illness", "chronic", "smoke",  "phys_act",  "med_need"};

// Panel CSV -> validated records. Malformed rows (wrong field counts,
// unparseable numbers, unknown codes) abort with a row-numbered error;
// invariant failures (age under 26, off-menu deductible, duplicate
// person-year, missing values) drop the row into the ledger.
inline std::vector<PanelRecord> ingest_panel_csv(std::istream& in, DropLedger& ledger,
                                                 const std::string& source = "panel") {
    csv::Reader reader(in, source);
    reader.require_columns(kPanelColumns);
    std::vector<PanelRecord> out;
    std::set<std::pair<std::int64_t, int>> seen;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        bool missing = false;
        for (const auto& f : fields) {
            if (f.empty()) {
                missing = true;
                break;
            }
        }
        PanelRecord rec;
        if (!missing) {
            try {
                rec.person_id = reader.int_field(fields, "person_id");
                rec.year = static_cast<int>(reader.int_field(fields, "year"));
                rec.canton = market::canton_index(reader.field(fields, "canton"));
                rec.age = static_cast<int>(reader.int_field(fields, "age"));
                rec.gender = static_cast<int>(reader.int_field(fields, "gender"));
                rec.educ_years = static_cast<int>(reader.int_field(fields, "educ_years"));
                rec.hh_size = static_cast<int>(reader.int_field(fields, "hh_size"));
                rec.income_pm = reader.double_field(fields, "income_pm");
                rec.employment = parse_employment(reader.field(fields, "employment"));
                rec.subsidy = reader.int_field(fields, "subsidy") != 0;
                rec.suppl_ins = reader.int_field(fields, "suppl_ins") != 0;
                rec.deductible = static_cast<int>(reader.int_field(fields, "deductible"));
                rec.plan_type = market::parse_plan_type(reader.field(fields, "plan_type"));
                rec.visits = static_cast<int>(reader.int_field(fields, "visits"));
                rec.self_health = static_cast<int>(reader.int_field(fields, "self_health"));
                rec.illness = reader.int_field(fields, "illness") != 0;
                rec.chronic = reader.int_field(fields, "chronic") != 0;
                rec.smoke = reader.int_field(fields, "smoke") != 0;
                rec.phys_act = reader.int_field(fields, "phys_act") != 0;
                rec.med_need = static_cast<int>(reader.int_field(fields, "med_need"));
            } catch (const std::exception& e) {
                throw std::runtime_error(source + ":" + std::to_string(reader.row_number()) +
                                         ": " + e.what());
            }
        }
        if (missing) {
            ledger.add("ingest", reader.row_number(), 0, 0, "missing value");
            continue;
        }
        if (rec.age < 26) {
            ledger.add("ingest", reader.row_number(), rec.person_id, rec.year, "age<26");
            continue;
        }
        if (!market::is_menu_deductible(rec.deductible)) {
            ledger.add("ingest", reader.row_number(), rec.person_id, rec.year,
                       "deductible off menu");
            continue;
        }
        if (rec.visits < 0) {
            ledger.add("ingest", reader.row_number(), rec.person_id, rec.year, "negative visits");
            continue;
        }
        if (rec.self_health < 1 || rec.self_health > 5) {
            ledger.add("ingest", reader.row_number(), rec.person_id, rec.year,
                       "self_health outside 1..5");
            continue;
        }
        if (rec.med_need < 0 || rec.med_need > 10) {
            ledger.add("ingest", reader.row_number(), rec.person_id, rec.year,
                       "med_need outside 0..10");
            continue;
        }
        if (!seen.insert({rec.person_id, rec.year}).second) {
            ledger.add("ingest", reader.row_number(), rec.person_id, rec.year,
                       "duplicate person-year");
            continue;
        }
        out.push_back(rec);
    }
    return out;
}

inline bool health_shock(bool illness_current, bool illness_lagged) {
    return illness_current && !illness_lagged;
}

// Pair each person-year with its immediately preceding wave; persons or
// years without a t-1 observation produce no row.
inline std::vector<EstimationRow> build_lags(std::vector<PanelRecord> records,
                                             DropLedger& ledger) {
    std::sort(records.begin(), records.end(), [](const PanelRecord& a, const PanelRecord& b) {
        return a.person_id != b.person_id ? a.person_id < b.person_id : a.year < b.year;
    });
    std::vector<EstimationRow> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const bool has_prev = i > 0 && records[i - 1].person_id == records[i].person_id &&
                              records[i - 1].year == records[i].year - 1;
        if (!has_prev) {
            const bool is_lag_source =
                i + 1 < records.size() && records[i + 1].person_id == records[i].person_id &&
                records[i + 1].year == records[i].year + 1;
            ledger.add("lags", 0, records[i].person_id, records[i].year,
                       is_lag_source ? "first wave (lag source only)" : "no adjacent wave");
            continue;
        }
        const PanelRecord& prev = records[i - 1];
        EstimationRow row;
        row.cur = records[i];
        row.lag_visits = prev.visits;
        row.lag_self_health = prev.self_health;
        row.lag_illness = prev.illness;
        row.lag_chronic = prev.chronic;
        row.lag_smoke = prev.smoke;
        row.lag_phys_act = prev.phys_act;
        row.lag_med_need = prev.med_need;
        row.lag_deductible = prev.deductible;
        row.health_shock = health_shock(row.cur.illness, prev.illness);
        out.push_back(row);
    }
    return out;
}

// Keep rows with at least one visit and attach the log outcome.
inline std::vector<EstimationRow> intensive_margin(std::vector<EstimationRow> rows,
                                                   DropLedger& ledger) {
    std::vector<EstimationRow> out;
    for (auto& row : rows) {
        if (row.cur.visits < 1) {
            ledger.add("intensive_margin", 0, row.cur.person_id, row.cur.year, "zero visits");
            continue;
        }
        row.has_log_visits = true;
        row.log_visits = std::log(static_cast<double>(row.cur.visits));
        out.push_back(row);
    }
    return out;
}

inline int treatment_indicator(int deductible, TreatmentSide side) {
    if (!market::is_menu_deductible(deductible))
        throw std::invalid_argument("treatment_indicator: deductible not on the menu");
    if (side == TreatmentSide::Lowest) return deductible == 300 ? 1 : 0;
    return deductible == 2500 ? 1 : 0;
}

// Switching bands: every ordered pair from the menu lands in one of the
// five groups (small moves are 200-700, large ones 1000-2200).
inline SwitchGroup switching_group(int deductible_t, int deductible_prev) {
    if (!market::is_menu_deductible(deductible_t) || !market::is_menu_deductible(deductible_prev))
        throw std::invalid_argument("switching_group: deductible not on the menu");
    const int diff = deductible_t - deductible_prev;
    if (diff == 0) return SwitchGroup::NoSwitch;
    if (diff >= -700 && diff <= -200) return SwitchGroup::MildDrop;
    if (diff <= -1000) return SwitchGroup::StrongDrop;
    if (diff >= 200 && diff <= 700) return SwitchGroup::MildIncrease;
    return SwitchGroup::StrongIncrease;
}

// Attach the average market premium for the row's coverage cell; missing
// cells drop the row with a diagnostic. The analysis sample is 26+, so the
// age group is always adult.
inline std::vector<EstimationRow> join_premiums(std::vector<EstimationRow> rows,
                                                const market::PremiumTable& table,
                                                DropLedger& ledger) {
    std::vector<EstimationRow> out;
    for (auto& row : rows) {
        if (!table.has_cell(row.cur.canton, market::AgeGroup::Adult, row.cur.deductible,
                            row.cur.plan_type)) {
            ledger.add("join_premiums", 0, row.cur.person_id, row.cur.year,
                       "no market premium for cell " +
                           std::string(market::kCantonCodes[row.cur.canton]) + "/" +
                           std::to_string(row.cur.deductible) + "/" +
                           market::to_string(row.cur.plan_type));
            continue;
        }
        row.avg_premium = table.average(row.cur.canton, market::AgeGroup::Adult,
                                        row.cur.deductible, row.cur.plan_type);
        out.push_back(row);
    }
    return out;
}

inline void apply_treatment(std::vector<EstimationRow>& rows, TreatmentSide side) {
    for (auto& row : rows) {
        row.treatment = treatment_indicator(row.cur.deductible, side);
        row.switching = switching_group(row.cur.deductible, row.lag_deductible);
    }
}

namespace detail {

// The ten stability fields compared across waves.
inline auto stability_key(const EstimationRow& row) {
    return std::make_tuple(row.cur.canton, row.cur.subsidy, row.cur.self_health,
                           row.cur.illness, row.cur.smoke, row.cur.chronic, row.cur.phys_act,
                           row.cur.med_need, row.cur.employment, row.cur.hh_size);
}

}  // namespace detail

// Keep persons observed in both waves whose stability fields never change.
inline std::vector<EstimationRow> stable_subsample(std::vector<EstimationRow> rows,
                                                   DropLedger& ledger) {
    std::map<std::int64_t, std::vector<const EstimationRow*>> by_person;
    for (const auto& row : rows) by_person[row.cur.person_id].push_back(&row);
    std::set<std::int64_t> keep;
    for (const auto& [person, person_rows] : by_person) {
        if (person_rows.size() < 2) {
            ledger.add("stable_subsample", 0, person, person_rows.front()->cur.year,
                       "single wave");
            continue;
        }
        bool stable = true;
        for (std::size_t i = 1; i < person_rows.size(); ++i) {
            if (detail::stability_key(*person_rows[i]) != detail::stability_key(*person_rows[0])) {
                stable = false;
                break;
            }
        }
        if (stable) {
            keep.insert(person);
        } else {
            ledger.add("stable_subsample", 0, person, 0, "characteristics changed");
        }
    }
    std::vector<EstimationRow> out;
    for (auto& row : rows) {
        if (keep.count(row.cur.person_id)) {
            row.stable = true;
            out.push_back(row);
        }
    }
    return out;
}

struct Stratum {
    std::string name;
    std::vector<EstimationRow> rows;
};

// Partition by household band {1,2,3+}, gender, subsidy, or education split
// at the sample median years.
inline std::vector<Stratum> stratify(const std::vector<EstimationRow>& rows,
                                     const std::string& dimension) {
    std::vector<Stratum> strata;
    const auto bucket = [&](const std::string& name) -> std::vector<EstimationRow>& {
        for (auto& s : strata) {
            if (s.name == name) return s.rows;
        }
        strata.push_back({name, {}});
        return strata.back().rows;
    };
    if (dimension == "household_size_band") {
        bucket("hh_1");
        bucket("hh_2");
        bucket("hh_3plus");
        for (const auto& row : rows) {
            const int hh = row.cur.hh_size;
            bucket(hh <= 1 ? "hh_1" : hh == 2 ? "hh_2" : "hh_3plus").push_back(row);
        }
    } else if (dimension == "gender") {
        bucket("women");
        bucket("men");
        for (const auto& row : rows) bucket(row.cur.gender ? "women" : "men").push_back(row);
    } else if (dimension == "subsidy") {
        bucket("subsidy");
        bucket("no_subsidy");
        for (const auto& row : rows)
            bucket(row.cur.subsidy ? "subsidy" : "no_subsidy").push_back(row);
    } else if (dimension == "education_band") {
        std::vector<double> years;
        years.reserve(rows.size());
        for (const auto& row : rows) years.push_back(row.cur.educ_years);
        std::sort(years.begin(), years.end());
        const double median = years.empty() ? 0.0 : quantile_sorted(years, 0.5);
        bucket("educ_low");
        bucket("educ_high");
        for (const auto& row : rows)
            bucket(row.cur.educ_years <= median ? "educ_low" : "educ_high").push_back(row);
    } else {
        throw std::invalid_argument("stratify: unknown dimension " + dimension);
    }
    return strata;
}

// ---------------------------------------------------------------------------
// Design-matrix assembly for the estimators.

struct DesignSpec {
    std::vector<std::string> covariates;
    std::vector<std::string> instruments;
    bool canton_fe = false;
};

namespace detail {

inline double column_value(const EstimationRow& row, const std::string& name) {
    if (name == "age") return row.cur.age;
    if (name == "age_sq") return static_cast<double>(row.cur.age) * row.cur.age;
    if (name == "gender") return row.cur.gender;
    if (name == "educ_years") return row.cur.educ_years;
    if (name == "hh_size") return row.cur.hh_size;
    if (name == "income_pm") return row.cur.income_pm;
    if (name == "subsidy") return row.cur.subsidy ? 1.0 : 0.0;
    if (name == "suppl_ins") return row.cur.suppl_ins ? 1.0 : 0.0;
    if (name == "employment_unemployed")
        return row.cur.employment == Employment::Unemployed ? 1.0 : 0.0;
    if (name == "employment_nilf") return row.cur.employment == Employment::Nilf ? 1.0 : 0.0;
    if (name == "health_shock") return row.health_shock ? 1.0 : 0.0;
    if (name == "avg_premium") return row.avg_premium;
    if (name == "lag_visits") return row.lag_visits;
    if (name == "lag_self_health") return row.lag_self_health;
    if (name == "lag_chronic") return row.lag_chronic ? 1.0 : 0.0;
    if (name == "lag_smoke") return row.lag_smoke ? 1.0 : 0.0;
    if (name == "lag_phys_act") return row.lag_phys_act ? 1.0 : 0.0;
    if (name == "lag_med_need") return row.lag_med_need;
    throw std::invalid_argument("unknown design column: " + name);
}

}  // namespace detail

// Rows -> outcome, covariates, instruments, treatment, clusters. Canton
// indicators (alphabetically first canton present = reference) are appended
// when requested.
inline econ::EstimationInput build_estimation_input(const std::vector<EstimationRow>& rows,
                                                    const DesignSpec& spec) {
    if (rows.empty()) throw std::invalid_argument("build_estimation_input: no rows");
    const auto n = static_cast<long>(rows.size());

    std::vector<std::string> fe_cantons;
    if (spec.canton_fe) {
        std::set<std::string> codes;
        for (const auto& row : rows) codes.insert(market::kCantonCodes[row.cur.canton]);
        fe_cantons.assign(codes.begin(), codes.end());  // sorted alphabetically
        if (!fe_cantons.empty()) fe_cantons.erase(fe_cantons.begin());  // reference canton
    }

    econ::EstimationInput input;
    input.x_names = spec.covariates;
    for (const auto& code : fe_cantons) input.x_names.push_back("canton_" + code);
    input.z_names = spec.instruments;

    input.y.resize(n);
    input.d.resize(n);
    input.x.resize(n, static_cast<long>(input.x_names.size()));
    input.z_excl.resize(n, static_cast<long>(input.z_names.size()));
    input.cluster.resize(rows.size());

    for (long i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (!row.has_log_visits)
            throw std::invalid_argument("build_estimation_input: row without log outcome");
        input.y[i] = row.log_visits;
        input.d[i] = row.treatment;
        input.cluster[static_cast<std::size_t>(i)] = row.cur.canton;
        long col = 0;
        for (const auto& name : spec.covariates)
            input.x(i, col++) = detail::column_value(row, name);
        for (const auto& code : fe_cantons)
            input.x(i, col++) = market::kCantonCodes[row.cur.canton] == code ? 1.0 : 0.0;
        for (std::size_t j = 0; j < spec.instruments.size(); ++j)
            input.z_excl(i, static_cast<long>(j)) =
                detail::column_value(row, spec.instruments[j]);
    }
    return input;
}

}  // namespace dmte::pipe
