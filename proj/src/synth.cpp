#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "tvcp/dataset.hpp"
#include "tvcp/error.hpp"
#include "tvcp/rng.hpp"
#include "tvcp/util.hpp"

namespace tvcp {
namespace {

struct Activity {
  const char* phrase;
  int base;  // duration class index, always in [1, 9]
};

const std::vector<Activity> kActivities = {
    {"brushing my teeth", 1},           {"waiting for the kettle to boil", 1},
    {"grabbing a quick coffee", 2},     {"taking out the trash", 1},
    {"making a sandwich", 2},           {"taking a shower", 2},
    {"walking the dog", 3},             {"cooking dinner", 3},
    {"doing the laundry", 4},           {"driving home from work", 4},
    {"at the gym", 4},                  {"watching a movie", 4},
    {"baking bread", 5},                {"studying for my exam", 5},
    {"at a baseball game", 5},          {"cleaning the whole house", 5},
    {"working a double shift", 6},      {"at the music festival", 6},
    {"flying to Chicago", 6},           {"stuck at the hospital", 6},
    {"visiting my grandparents", 7},    {"moving to a new apartment", 7},
    {"on a camping trip", 8},           {"sick with the flu", 8},
    {"on vacation in Spain", 9},        {"renovating the kitchen", 9},
    {"training for a marathon", 9},     {"house sitting for my neighbor", 8},
    {"writing my term paper", 7},       {"painting the fence", 5},
};

const std::vector<std::string> kTargetFrames = {
    "I am {}",           "Currently {}",          "Just started {}",
    "Right now I'm {}",  "Guess who is {}",       "Finally {}",
    "Ugh, {} again",     "Heading out, {}",       "So I'm {} today",
    "{} with my sister", "Still {}",              "About to be {}",
};

const std::vector<std::string> kDecreaseCues = {
    "nevermind, it got cancelled",           "almost done already",
    "we wrapped up early",                   "turns out it only takes a few minutes",
    "they cut it short",                     "just about finished",
    "plans fell through so it's over",       "it ended sooner than expected",
    "only a little bit left to go",          "called it off halfway through",
};

const std::vector<std::string> kIncreaseCues = {
    "it got postponed until later",          "this will take longer than I thought",
    "we got delayed by the traffic",         "they extended it by a lot",
    "now it's pushed back again",            "it got rescheduled to next time",
    "looks like it will run way over",       "everything is running behind schedule",
    "had to start over from scratch",        "the wait just doubled",
};

const std::vector<std::string> kNeutralFillers = {
    "the weather is lovely",                 "my cat says hi",
    "listening to my favourite playlist",    "had a great cup of tea",
    "this song is stuck in my head",         "feeling grateful for my friends",
    "my phone battery is at 80 percent",     "I really like these new shoes",
    "the sky looks so pretty",               "wearing my lucky socks",
};

const std::vector<std::string> kFollowupPrefixes = {"", "", "", "Update: ", "Honestly, ", "lol ", "Oh well, ",
                                                    "So "};
const std::vector<std::string> kFollowupSuffixes = {"", "", "", ".", "!", " haha", " :)", "..."};

std::string fill(const std::string& frame, const std::string& value) {
  const auto pos = frame.find("{}");
  std::string out = frame.substr(0, pos) + value + frame.substr(pos + 2);
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

int shift_magnitude(Rng& rng) {
  const double u = rng.uniform01();
  return u < 0.6 ? 1 : (u < 0.9 ? 2 : 3);
}

}  // namespace

std::vector<Sample> synth_generate(int n_targets, std::uint64_t seed) {
  if (n_targets < 1) throw ContractError("synth_generate needs at least one target");
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n_targets) * 3);
  for (int t = 0; t < n_targets; ++t) {
    char tid[32];
    std::snprintf(tid, sizeof tid, "syn-%05d", t);
    const auto& act = rng.pick(kActivities);
    const std::string target = fill(rng.pick(kTargetFrames), act.phrase);
    const DurationClass original = class_of(act.base);

    for (TvcpLabel label : kAllTvcpLabels) {
      const auto& pool = label == TvcpLabel::kDec   ? kDecreaseCues
                         : label == TvcpLabel::kInc ? kIncreaseCues
                                                    : kNeutralFillers;
      std::string followup = rng.pick(kFollowupPrefixes) + rng.pick(pool) + rng.pick(kFollowupSuffixes);
      if (!followup.empty() && followup[0] >= 'a' && followup[0] <= 'z')
        followup[0] = static_cast<char>(followup[0] - 'a' + 'A');
      int updated = act.base;
      if (label == TvcpLabel::kDec) updated = std::max(0, act.base - shift_magnitude(rng));
      if (label == TvcpLabel::kInc) updated = std::min(kNumDurationClasses - 1, act.base + shift_magnitude(rng));

      Sample s;
      s.sample_id = std::string(tid) + "-" + to_lower(to_string(label));
      s.target_id = tid;
      s.target_text = target;
      s.followup_text = std::move(followup);
      s.original = original;
      s.updated = class_of(updated);
      s.label = label;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace tvcp
