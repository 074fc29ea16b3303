#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "p3/detect.hpp"
#include "p3/ingest.hpp"

namespace p3 {

/// Seeded stand-in corpus with a purely geometric class signal: positives
/// have a few opponents spread over a wide hull, negatives a crowded small
/// one. Pass origin and pressure are drawn independently of the label.
struct SynthConfig {
    int n = 500;                  // pass events
    std::uint64_t seed = 7;
    int passes_per_match = 20;
    double positive_share = 0.25;  // exact share of the valid moments
    double reject_share = 0.0;     // exact share of passes built to fail one detection rule
    int n_teams = 10;
    std::string match_prefix = "synth";
};

struct SynthCorpus {
    std::vector<std::string> match_ids;
    std::map<std::string, std::vector<Event>> events;
    std::map<std::string, std::vector<Frame360>> frames;
    std::map<std::string, Roster> rosters;
};

SynthCorpus generate_corpus(const SynthConfig& cfg, const DetectConfig& detect = {});

/// events/, three-sixty/ and lineups/ in the vendor layout.
void write_raw_corpus(const SynthCorpus& corpus, const std::filesystem::path& data_dir);

}  // namespace p3
