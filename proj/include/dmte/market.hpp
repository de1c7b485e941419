#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dmte/csv.hpp"

// Swiss mandatory-insurance market rules: the deductible menu, the
// deductible + 10% coinsurance cost-sharing schedule with its yearly cap,
// and the regulator-format premium listings behind the average-market-
// premium instrument.

namespace dmte::market {

inline constexpr std::array<int, 6> kDeductibleMenu{300, 500, 1000, 1500, 2000, 2500};
inline constexpr double kCoinsuranceRate = 0.1;
inline constexpr double kCoinsuranceCap = 700.0;

// Official two-letter codes for the 26 cantons.
inline constexpr std::array<const char*, 26> kCantonCodes{
    "ZH", "BE", "LU", "UR", "SZ", "OW", "NW", "GL", "ZG", "FR", "SO", "BS", "BL",
    "SH", "AR", "AI", "SG", "GR", "AG", "TG", "TI", "VD", "VS", "NE", "GE", "JU"};

inline int canton_index(const std::string& code) {
    for (std::size_t i = 0; i < kCantonCodes.size(); ++i) {
        if (code == kCantonCodes[i]) return static_cast<int>(i);
    }
    throw std::invalid_argument("unknown canton code: " + code);
}

inline bool is_menu_deductible(int deductible) {
    return std::find(kDeductibleMenu.begin(), kDeductibleMenu.end(), deductible) !=
           kDeductibleMenu.end();
}

enum class PlanType { Free, Managed };
enum class AgeGroup { Child, YoungAdult, Adult };

inline std::string to_string(PlanType t) { return t == PlanType::Free ? "free" : "managed"; }
inline std::string to_string(AgeGroup g) {
    switch (g) {
        case AgeGroup::Child: return "child";
        case AgeGroup::YoungAdult: return "young_adult";
        default: return "adult";
    }
}

inline PlanType parse_plan_type(const std::string& s) {
    if (s == "free") return PlanType::Free;
    if (s == "managed") return PlanType::Managed;
    throw std::invalid_argument("unknown plan type code: " + s);
}

inline AgeGroup parse_age_group(const std::string& s) {
    if (s == "child") return AgeGroup::Child;
    if (s == "young_adult") return AgeGroup::YoungAdult;
    if (s == "adult") return AgeGroup::Adult;
    throw std::invalid_argument("unknown age group code: " + s);
}

struct PlanSpec {
    int deductible = 300;
    PlanType plan_type = PlanType::Free;
    AgeGroup age_group = AgeGroup::Adult;
    int canton = 0;

    void validate() const {
        if (!is_menu_deductible(deductible))
            throw std::invalid_argument("PlanSpec: deductible not on the menu");
        if (canton < 0 || canton >= static_cast<int>(kCantonCodes.size()))
            throw std::invalid_argument("PlanSpec: canton index out of range");
    }
};

// Yearly out-of-pocket amount: the deductible, then 10% of the excess,
// capped at 700.
inline double out_of_pocket(double annual_spend, int deductible) {
    if (!(annual_spend >= 0.0)) throw std::invalid_argument("out_of_pocket: negative spend");
    if (!is_menu_deductible(deductible))
        throw std::invalid_argument("out_of_pocket: deductible not on the menu");
    const double d = static_cast<double>(deductible);
    const double below = std::min(annual_spend, d);
    // Division by 10 keeps centime-aligned amounts exact in binary floating
    // point, unlike multiplication by 0.1.
    const double coinsurance =
        annual_spend > d ? std::min((annual_spend - d) / 10.0, kCoinsuranceCap) : 0.0;
    return below + coinsurance;
}

// Piecewise marginal price of one more franc of care: 1 below the
// deductible, 0.1 in the coinsurance band, 0 once the cap is exhausted.
// Bands are half-open on the right: [0,d), [d, d+7000), [d+7000, inf).
inline double marginal_price(double annual_spend, int deductible) {
    if (!(annual_spend >= 0.0)) throw std::invalid_argument("marginal_price: negative spend");
    if (!is_menu_deductible(deductible))
        throw std::invalid_argument("marginal_price: deductible not on the menu");
    const double d = static_cast<double>(deductible);
    if (annual_spend < d) return 1.0;
    if (annual_spend < d + kCoinsuranceCap / kCoinsuranceRate) return kCoinsuranceRate;
    return 0.0;
}

// CHF with two decimals held exactly as rappen.
inline std::int64_t to_rappen(double chf) { return std::llround(chf * 100.0); }
inline double from_rappen(std::int64_t r) { return static_cast<double>(r) / 100.0; }

struct PremiumRow {
    int canton = 0;
    AgeGroup age_group = AgeGroup::Adult;
    int deductible = 300;
    PlanType plan_type = PlanType::Free;
    std::string insurer;
    std::int64_t premium_rappen = 0;  // monthly premium
};

// Immutable after ingestion; reads are safe to share across threads.
class PremiumTable {
public:
    using CellKey = std::tuple<int, AgeGroup, int, PlanType>;

    void add_row(const PremiumRow& row) {
        if (row.premium_rappen <= 0)
            throw std::invalid_argument("PremiumTable: monthly premium must be > 0");
        if (!is_menu_deductible(row.deductible))
            throw std::invalid_argument("PremiumTable: deductible not on the menu");
        const CellKey key{row.canton, row.age_group, row.deductible, row.plan_type};
        auto& cell = cells_[key];
        for (std::size_t idx : cell) {
            if (rows_[idx].insurer == row.insurer)
                throw std::invalid_argument("PremiumTable: duplicate (cell, insurer) key for insurer " +
                                            row.insurer);
        }
        cell.push_back(rows_.size());
        rows_.push_back(row);
    }

    bool has_cell(int canton, AgeGroup age_group, int deductible, PlanType plan_type) const {
        return cells_.count({canton, age_group, deductible, plan_type}) > 0;
    }

    // Unweighted mean of monthly premiums across insurers in the cell.
    // Rappen are summed as integers, so the result is order-independent.
    double average(int canton, AgeGroup age_group, int deductible, PlanType plan_type) const {
        const auto it = cells_.find({canton, age_group, deductible, plan_type});
        if (it == cells_.end() || it->second.empty())
            throw std::runtime_error("PremiumTable: no premiums for cell " +
                                     std::string(kCantonCodes[canton]) + "/" +
                                     to_string(age_group) + "/" + std::to_string(deductible) +
                                     "/" + to_string(plan_type));
        std::int64_t sum = 0;
        for (std::size_t idx : it->second) sum += rows_[idx].premium_rappen;
        return static_cast<double>(sum) /
               (100.0 * static_cast<double>(it->second.size()));
    }

    std::size_t size() const { return rows_.size(); }
    const std::vector<PremiumRow>& rows() const { return rows_; }

private:
    std::vector<PremiumRow> rows_;
    std::map<CellKey, std::vector<std::size_t>> cells_;
};

// Canonical premium CSV: canton,age_group,deductible,plan_type,insurer,monthly_premium
inline PremiumTable ingest_premium_csv(std::istream& in, const std::string& source = "premiums") {
    csv::Reader reader(in, source);
    reader.require_columns({"canton", "age_group", "deductible", "plan_type", "insurer",
                            "monthly_premium"});
    PremiumTable table;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        PremiumRow row;
        try {
            row.canton = canton_index(reader.field(fields, "canton"));
            row.age_group = parse_age_group(reader.field(fields, "age_group"));
            row.deductible = static_cast<int>(reader.int_field(fields, "deductible"));
            row.plan_type = parse_plan_type(reader.field(fields, "plan_type"));
            row.insurer = reader.field(fields, "insurer");
            row.premium_rappen = to_rappen(reader.double_field(fields, "monthly_premium"));
            table.add_row(row);
        } catch (const std::exception& e) {
            throw std::runtime_error(source + ":" + std::to_string(reader.row_number()) + ": " +
                                     e.what());
        }
    }
    return table;
}

}  // namespace dmte::market
