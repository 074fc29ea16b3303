#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "p3/geometry.hpp"
#include "p3/ingest.hpp"

namespace p3 {

enum class Label { non_penetrative, penetrative };
std::string_view to_string(Label l);

enum class Rejection {
    not_a_pass,
    body_part,
    set_piece,
    outside_zone,
    insufficient_opponents,
    degenerate_hull,
    no_receiver_inside_hull,
};

/// Human-readable reason, e.g. "no receiver inside hull".
std::string_view to_string(Rejection r);

struct DetectConfig {
    int min_opponents_for_hull = 3;
    bool boundary_counts_inside = true;
    double zone_lo = kPitchLength / 3.0;
    double zone_hi = 3.0 * kPitchLength / 4.0;
    bool exclude_set_pieces = true;

    /// Throws std::invalid_argument when the zone is not 0 <= lo < hi <= 120.
    void validate() const;
};

struct LabelBasis {
    PassOutcome outcome = PassOutcome::unknown;
    std::optional<Point> end_location;
    bool end_in_hull = false;

    friend bool operator==(const LabelBasis&, const LabelBasis&) = default;
};

struct P3Moment {
    std::string moment_id;
    std::string match_id;
    std::string event_id;
    std::string team_id;
    std::string player_id;
    int period = 1;
    int minute = 0;
    int second = 0;
    Point origin;
    bool under_pressure = false;
    BodyPart body_part = BodyPart::right_foot;
    Polygon hull;
    int opponents_in_hull_count = 0;  // opponents used to build the hull
    std::vector<Point> receivers_inside;
    std::optional<Polygon> visible_area;
    std::vector<FramePlayer> all_players;
    Label label = Label::non_penetrative;
    LabelBasis label_basis;

    friend bool operator==(const P3Moment&, const P3Moment&) = default;
};

using DetectOutcome = std::variant<P3Moment, Rejection>;

DetectOutcome detect_p3(const PassSnapshot& snapshot, const DetectConfig& cfg = {});

/// Positive iff the pass was completed and ended inside or on the hull.
std::pair<Label, LabelBasis> label_penetrative(const Polygon& hull, const PassDetail& pass);

inline Label label_from_basis(const LabelBasis& b) {
    return b.outcome == PassOutcome::complete && b.end_in_hull ? Label::penetrative : Label::non_penetrative;
}

struct DetectReport {
    std::size_t snapshots = 0;
    std::size_t moments = 0;
    std::size_t positives = 0;
    std::map<std::string, std::size_t> rejections;  // reason -> count

    double positive_share() const { return moments == 0 ? 0.0 : static_cast<double>(positives) / moments; }
};

struct ScanResult {
    std::vector<P3Moment> moments;
    DetectReport report;
};

/// Detects over every snapshot of the store in match-manifest order.
ScanResult scan_corpus(const Store& store, const DetectConfig& cfg = {});

/// Convenience: rebuild the snapshot a moment was detected from. Used by
/// what-if rescoring.
PassSnapshot snapshot_from_moment(const P3Moment& m);

nlohmann::json to_json(const P3Moment& m);
P3Moment moment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DetectReport& r);
nlohmann::json to_json(const DetectConfig& c);

void write_moments(const std::filesystem::path& path, const std::vector<P3Moment>& moments);
std::vector<P3Moment> read_moments(const std::filesystem::path& path);

}  // namespace p3
