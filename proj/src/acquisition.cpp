#include "fieldloom/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "fieldloom/csv.hpp"

namespace fieldloom {

int CalendarDate::day_of_year() const {
    static const int cum[12] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
    int doy = cum[month - 1] + day;
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (leap && month > 2) ++doy;
    return doy;
}

CalendarDate parse_iso_date(const std::string& iso) {
    CalendarDate d;
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        throw std::invalid_argument("expected ISO-8601 date YYYY-MM-DD, got '" + iso + "'");
    d.year = std::stoi(iso.substr(0, 4));
    d.month = std::stoi(iso.substr(5, 2));
    d.day = std::stoi(iso.substr(8, 2));
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
        throw std::invalid_argument("invalid calendar date '" + iso + "'");
    return d;
}

static void check_candidate(const AcquisitionMeta& c, const DateRange& period) {
    if (c.cloud_cover_pct < 0 || c.cloud_cover_pct > 100)
        throw std::invalid_argument("acquisition " + c.acquisition_id + ": cloud cover out of [0,100]");
    if (c.cloud_cover_pct > 10.0)
        throw std::invalid_argument("acquisition " + c.acquisition_id +
                                    ": cloud cover above the 10% filter");
    if (c.date < period.begin || period.end < c.date)
        throw std::invalid_argument("acquisition " + c.acquisition_id + ": outside target period");
}

std::optional<AcquisitionMeta> select_acquisition(const std::vector<AcquisitionMeta>& candidates,
                                                  int target_year, const DateRange& target_period) {
    if (candidates.empty()) return std::nullopt;

    auto key = [target_year](const AcquisitionMeta& a) {
        return std::make_tuple(!a.covers_full_tile,            // full coverage first
                               a.date.year != target_year,     // target year next
                               std::abs(a.date.year - target_year),
                               a.cloud_cover_pct,
                               -a.date.day_of_year(),          // later day of year preferred
                               a.acquisition_id);
    };

    const AcquisitionMeta* best = nullptr;
    for (const auto& c : candidates) {
        check_candidate(c, target_period);
        if (!best || key(c) < key(*best)) best = &c;
    }
    return *best;
}

std::vector<AcquisitionMeta> mosaic_fill(const std::optional<AcquisitionMeta>& selected,
                                         const std::vector<AcquisitionMeta>& fallback_candidates) {
    if (selected && selected->covers_full_tile) return {*selected};

    std::vector<AcquisitionMeta> plan = fallback_candidates;
    if (selected) {
        bool present = std::any_of(plan.begin(), plan.end(), [&](const AcquisitionMeta& a) {
            return a.acquisition_id == selected->acquisition_id;
        });
        if (!present) plan.push_back(*selected);
    }
    std::sort(plan.begin(), plan.end(), [](const AcquisitionMeta& a, const AcquisitionMeta& b) {
        if (a.date != b.date) return b.date < a.date; // most recent first
        return a.acquisition_id < b.acquisition_id;
    });
    return plan;
}

std::vector<AcquisitionMeta> load_acquisitions_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int c_tile = t.col_required("tile_id");
    int c_date = t.col_required("date");
    int c_cc = t.col_required("cloud_cover_pct");
    int c_full = t.col_required("covers_full_tile");
    int c_id = t.col("acquisition_id");

    std::vector<AcquisitionMeta> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        AcquisitionMeta a;
        a.tile_id = r[c_tile];
        a.date = parse_iso_date(r[c_date]);
        a.cloud_cover_pct = std::stod(r[c_cc]);
        a.covers_full_tile = (r[c_full] == "1" || r[c_full] == "true");
        a.acquisition_id = c_id >= 0 ? r[c_id] : a.tile_id + "_" + r[c_date];
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace fieldloom
