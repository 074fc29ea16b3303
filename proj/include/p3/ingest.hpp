#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "p3/geometry.hpp"

namespace p3 {

inline constexpr int kStoreSchemaVersion = 2;

// Thrown for unreadable JSON. `byte_offset` is the zero-based index of the offending byte.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what), byte_offset_(byte_offset) {}
    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class EventKind { pass, substitution, other };
enum class BodyPart { right_foot, left_foot, head, other };
enum class PassOutcome { complete, incomplete, out, offside, unknown };

std::string_view to_string(EventKind k);
std::string_view to_string(BodyPart b);
std::string_view to_string(PassOutcome o);
BodyPart body_part_from_string(std::string_view s);
PassOutcome outcome_from_string(std::string_view s);

struct PassDetail {
    BodyPart body_part = BodyPart::other;
    std::optional<Point> end_location;
    PassOutcome outcome = PassOutcome::complete;
    bool set_piece = false;
    std::string pass_type;  // vendor name of the set-piece type, empty in open play

    friend bool operator==(const PassDetail&, const PassDetail&) = default;
};

struct Event {
    std::string event_id;
    std::string match_id;
    int minute = 0;
    int second = 0;
    int period = 1;
    std::string team_id;
    std::string player_id;
    EventKind event_kind = EventKind::other;
    std::string type_name;  // vendor type name, kept for round-trips
    std::optional<Point> location;
    bool under_pressure = false;
    std::optional<PassDetail> pass_detail;
    std::string replacement_id;  // substitutions only

    friend bool operator==(const Event&, const Event&) = default;
};

struct FramePlayer {
    Point location;
    bool teammate = false;
    bool actor = false;
    bool keeper = false;

    friend bool operator==(const FramePlayer&, const FramePlayer&) = default;
};

struct Frame360 {
    std::string event_id;
    std::optional<Polygon> visible_area;  // vertices as given, not hull-normalized
    std::vector<FramePlayer> players;

    friend bool operator==(const Frame360&, const Frame360&) = default;
};

struct PassSnapshot {
    Event event;
    Frame360 frame;
    int attack_sign = +1;

    friend bool operator==(const PassSnapshot&, const PassSnapshot&) = default;
};

struct RecordError {
    std::size_t index = 0;  // position in the input array
    std::string message;
};

template <class T>
struct ParseResult {
    std::vector<T> items;
    std::vector<RecordError> errors;
    std::size_t clamped = 0;
};

struct RosterPlayer {
    std::string player_id;
    std::string name;
    std::string position_name;
    std::optional<std::string> birth_date;  // YYYY-MM-DD
    std::string team_id;
};

struct Substitution {
    int minute = 0;
    std::string team_id;
    std::string off_player;
    std::string on_player;
};

struct Roster {
    std::string match_id;
    std::vector<std::string> team_ids;  // in file order
    std::map<std::string, RosterPlayer> players;
    std::map<std::string, std::vector<std::string>> starting_xi;  // team -> players
    std::vector<Substitution> substitutions;
    int match_end_minute = 0;
};

/// StatsBomb events array. Passes missing a required field are skipped and
/// reported in `errors`; unknown event types map to EventKind::other.
ParseResult<Event> parse_events(std::string_view raw, const std::string& match_id);

/// StatsBomb 360 frames array. Out-of-pitch coordinates are clamped and counted.
ParseResult<Frame360> parse_frames(std::string_view raw);

/// StatsBomb lineups for one match. Throws DataError("roster incomplete")
/// on an empty team list.
Roster parse_lineups(std::string_view raw, const std::string& match_id);

/// Adds substitutions and the match end minute taken from the event stream.
/// Substitutions naming a player not on the roster are skipped and counted.
std::size_t attach_events(Roster& roster, const std::vector<Event>& events);

struct JoinReport {
    std::size_t passes = 0;
    std::size_t snapshots = 0;
    std::size_t unmatched = 0;
    std::size_t no_opponents = 0;
    std::size_t duplicate_frames = 0;
};

struct JoinResult {
    std::vector<PassSnapshot> snapshots;
    JoinReport report;
};

/// One snapshot per pass with a frame holding at least one opponent.
/// Duplicate frames: first occurrence wins. Output ordered by
/// (match_id, period, minute, second, input order).
JoinResult join_pass_frames(const std::vector<Event>& events, const std::vector<Frame360>& frames);

/// Clamps all coordinates to the pitch and fixes attack_sign = +1.
PassSnapshot normalize(PassSnapshot s);

Point clamp_to_pitch(Point p);

// Vendor-schema serializers (inverse of the parsers on retained fields).
nlohmann::json event_to_statsbomb(const Event& e);
nlohmann::json frame_to_statsbomb(const Frame360& f);
nlohmann::json roster_to_statsbomb(const Roster& r);

// Store serializers.
nlohmann::json to_json(const Point& p);
Point point_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PassSnapshot& s);
PassSnapshot snapshot_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Roster& r);
Roster roster_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FramePlayer& p);
FramePlayer frame_player_from_json(const nlohmann::json& j);

struct MatchCounts {
    std::size_t passes = 0;
    std::size_t snapshots = 0;
    std::size_t unmatched = 0;
    std::size_t clamped = 0;
    std::size_t no_opponents = 0;
    std::size_t duplicate_frames = 0;
    std::size_t record_errors = 0;
};

struct IngestSummary {
    std::map<std::string, MatchCounts> matches;
};

/// Reads events/, three-sixty/ and lineups/ under `data_dir` and writes
/// <match>.snapshots.jsonl, <match>.roster.json and manifest.json to `store_dir`.
IngestSummary ingest_directory(const std::filesystem::path& data_dir, const std::filesystem::path& store_dir);

struct Store {
    std::vector<std::string> match_ids;  // manifest order
    std::map<std::string, std::vector<PassSnapshot>> snapshots;
    std::map<std::string, Roster> rosters;
};

Store load_store(const std::filesystem::path& store_dir);

}  // namespace p3
