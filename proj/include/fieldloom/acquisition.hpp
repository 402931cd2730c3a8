#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fieldloom {

struct CalendarDate {
    int year = 0;
    int month = 1;
    int day = 1;

    int day_of_year() const;
    auto operator<=>(const CalendarDate&) const = default;
};

CalendarDate parse_iso_date(const std::string& iso); // YYYY-MM-DD

struct AcquisitionMeta {
    std::string tile_id;
    std::string acquisition_id;
    CalendarDate date;
    double cloud_cover_pct = 0;
    bool covers_full_tile = false;
};

struct DateRange {
    CalendarDate begin; // inclusive
    CalendarDate end;   // inclusive
};

// Lexicographic priority: full coverage, target year, minimal |year - target|,
// minimal cloud cover, latest day of year; ties broken by acquisition id.
// Returns nullopt for empty input (mosaic gap).
std::optional<AcquisitionMeta> select_acquisition(const std::vector<AcquisitionMeta>& candidates,
                                                  int target_year, const DateRange& target_period);

// Composite plan for a tile no single acquisition covers: most recent first,
// earlier entries mask later ones pixel-wise. Empty plan = persistent gap.
std::vector<AcquisitionMeta> mosaic_fill(const std::optional<AcquisitionMeta>& selected,
                                         const std::vector<AcquisitionMeta>& fallback_candidates);

// CSV columns: tile_id, date (ISO-8601), cloud_cover_pct, covers_full_tile
// (plus optional acquisition_id).
std::vector<AcquisitionMeta> load_acquisitions_csv(const std::string& path);

} // namespace fieldloom
