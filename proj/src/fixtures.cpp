#include "csm/fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

namespace csm {

namespace {

std::string code(int phase, int task) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "f%dt%d", phase, task);
  return buf;
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d = {
      {"f0t5", "Put on the lab coat"},
      {"f0t6", "Wash hands"},
      {"f0t7", "Clean the bench"},
      {"f0t8", "Take rubber gloves"},
      {"f1t1", "Obtain a beaker"},
      {"f1t11", "Weigh the components"},
      {"f1t12", "Add tryptone to the mixture"},
      {"f1t13", "Add yeast extract to the mixture"},
      {"f1t14", "Adjust the pH of the mixture"},
      {"f1t15", "Add sodium chloride"},
      {"f1t16", "Add bacto agar to the mixture"},
      {"f1t19", "Switch on the mixer"},
      {"f1t20", "Turn off the mixer"},
      {"f1t22", "Turn on the laminar flow cabinet"},
      {"f1t25", "Put the bottle in the autoclave"},
      {"f1t26", "Start the autoclave"},
      {"f1t37", "Sterilize the material"},
      {"f2t34", "Add template DNA to the PCR mix"},
      {"f2t35", "Add forward primer to the PCR mix"},
      {"f2t36", "Add reverse primer to the PCR mix"},
      {"f2t37", "Add polymerase buffer to the PCR mix"},
      {"f2t38", "Add dNTPs to the PCR mix"},
      {"f2t39", "Add magnesium chloride to the PCR mix"},
      {"f2t40", "Add Taq polymerase to the PCR mix"},
      {"f2t41", "Add water to the PCR mix"},
      {"f2t44", "Spin the PCR tube"},
      {"f2t45", "Place the tube on ice"},
      {"f2t52", "Close the PCR tube"},
      {"f2t56", "Introduce the tube into the PCR machine"},
      {"f2t57", "Start the PCR process"},
      {"f3t33", "Add vector to the ligation mix"},
      {"f3t34", "Add PCR product to the ligation mix"},
      {"f3t35", "Add ligase buffer to the ligation mix"},
      {"f3t36", "Add ligase to the ligation mix"},
      {"f3t37", "Add water to the ligation mix"},
      {"f3t47", "Heat shock the cells"},
      {"f3t48", "Move the cells to ice"},
      {"f3t52", "Incubate the ligation mix"},
      {"f3t61", "Store the plates"},
      {"f1t90", "Add agarose to the mixture"},
      {"f2t90", "Add an unrelated primer to the PCR mix"},
      {"f3t90", "Add alkaline phosphatase to the ligation mix"},
  };
  return d;
}

ActionSpec& add(AssignmentConfig& c, const std::string& action, const std::string& phase) {
  ActionSpec spec;
  spec.code = action;
  spec.phase = phase;
  auto it = descriptions().find(action);
  spec.description = it != descriptions().end() ? it->second : "Step " + action;
  c.actions.push_back(std::move(spec));
  return c.actions.back();
}

ActionSpec& spec_of(AssignmentConfig& c, const std::string& action) {
  for (auto& a : c.actions) {
    if (a.code == action) return a;
  }
  throw Error(Errc::not_found, action);
}

}  // namespace

AssignmentConfig demo_config() {
  AssignmentConfig c;
  c.assignment_id = "biotech-demo";
  c.phases = {"f1", "f2", "f3"};
  for (int t = 5; t <= 8; ++t) c.correct_flow.push_back(code(0, t));
  for (int t = 1; t <= 40; ++t) c.correct_flow.push_back(code(1, t));
  for (int t = 30; t <= 57; ++t) c.correct_flow.push_back(code(2, t));
  for (int t = 30; t <= 61; ++t) c.correct_flow.push_back(code(3, t));
  for (const auto& a : c.correct_flow) add(c, a, a[1] == '0' ? "f1" : std::string("f") + a[1]);
  for (int p = 1; p <= 3; ++p) {
    for (int t = 90; t <= 99; ++t) add(c, code(p, t), "f" + std::to_string(p));
  }

  spec_of(c, "f1t1").dependencies = {"f0t8"};
  spec_of(c, "f1t16").dependencies = {"f1t12", "f1t13", "f1t14"};
  spec_of(c, "f1t20").dependencies = {"f1t12", "f1t13", "f1t14", "f1t16"};
  spec_of(c, "f2t52").dependencies = {"f2t34", "f2t35", "f2t36", "f2t37", "f2t38", "f2t39", "f2t40", "f2t41"};
  spec_of(c, "f2t57").dependencies = {"f2t56"};
  spec_of(c, "f3t52").dependencies = {"f3t33", "f3t34", "f3t35", "f3t36", "f3t37"};

  spec_of(c, "f1t16").incompatibilities = {"f1t90"};
  spec_of(c, "f2t52").incompatibilities = {"f2t90"};
  spec_of(c, "f3t52").incompatibilities = {"f3t90"};

  spec_of(c, "f1t26").time_constraints = {{"f1t25", 30.0, std::nullopt}};
  spec_of(c, "f2t45").time_constraints = {{"f2t44", 25.0, 300.0}};
  spec_of(c, "f3t48").time_constraints = {{"f3t47", std::nullopt, 50.0}};

  for (const char* a : {"f1t12", "f1t13", "f1t14", "f1t16"}) spec_of(c, a).weight = 2.0;
  for (const char* a : {"f2t37", "f2t40", "f3t34", "f3t35"}) spec_of(c, a).weight = 1.5;
  spec_of(c, "f1t22").weight = 0.5;
  for (int t = 90; t <= 99; ++t) spec_of(c, code(1, t)).weight = 0.5;

  spec_of(c, "f1t25").world_errors_relevant = true;
  spec_of(c, "f1t20").tutoring_message = "Check in your notes which components the growing medium needs.";
  spec_of(c, "f2t52").tutoring_message = "Review the PROTOCOL book: the PCR mix has eight components.";
  spec_of(c, "f2t57").tutoring_message = "The tube must be inside the PCR machine before starting it.";
  spec_of(c, "f3t52").tutoring_message = "Review the PROTOCOL book before incubating the ligation mix.";

  c.blocked_actions = {"f2t57", "f3t45"};
  c.reindex();
  return c;
}

namespace {

Timestamp day(int y, unsigned m, unsigned d) {
  return Timestamp{std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}}} +
         std::chrono::hours{9};
}

char* two_digit(char* buf, std::size_t size, const char* prefix, std::size_t n) {
  std::snprintf(buf, size, "%s%02zu", prefix, n);
  return buf;
}

// Plain walk along the flow at a steady pace, with optional edits.
std::vector<RawAction> scripted(const AssignmentConfig& c, const std::string& id, Timestamp start,
                                const std::vector<std::string>& skip,
                                const std::map<std::string, std::vector<std::string>>& after) {
  std::vector<RawAction> out;
  Timestamp now = start;
  auto emit = [&](const std::string& a) {
    now += std::chrono::seconds{40};
    out.push_back({id, now, a, std::nullopt});
  };
  for (const auto& a : c.correct_flow) {
    if (std::find(skip.begin(), skip.end(), a) == skip.end()) emit(a);
    if (auto it = after.find(a); it != after.end()) {
      for (const auto& late : it->second) emit(late);
    }
  }
  return out;
}

StudentLog finish(std::vector<RawAction> actions, const AssignmentConfig& c, std::mt19937_64& rng) {
  StudentLog log = replay_student(actions, c);
  log.grade = synthetic_grade(log, rng);
  return log;
}

GenerationProfile noisy_profile() {
  GenerationProfile p;
  p.skip_probability = 0.01;
  p.repeat_probability = 0.04;
  p.wrong_action_probability = 0.015;
  p.wrong_phase_probability = 0.005;
  p.world_error_probability = 0.01;
  p.time_violation_probability = 0.2;
  p.swap_probability = 0.01;
  p.force_error = true;
  p.skip_overrides = {{"f0t8", 0.0},  {"f1t14", 0.62}, {"f1t16", 0.66}, {"f1t12", 0.2},
                      {"f1t13", 0.2}, {"f2t37", 0.3},  {"f2t40", 0.3},  {"f2t56", 0.0},
                      {"f3t34", 0.2}, {"f3t35", 0.2}};
  return p;
}

}  // namespace

std::vector<std::vector<RawAction>> demo_raw_actions(const AssignmentConfig& c) {
  std::vector<std::vector<RawAction>> out;
  std::mt19937_64 rng(87);
  const std::vector<std::size_t> skip_gloves = {3, 15, 29, 41, 56, 68, 80};
  char buf[16];
  for (std::size_t i = 1; i <= 87; ++i) {
    const std::string id = two_digit(buf, sizeof buf, "s", i);
    const Timestamp start = day(2013, 9, 2) + std::chrono::days{12 * static_cast<long>(i - 1)};
    if (i == 22) {
      out.push_back(scripted(c, id, start, {}, {}));
    } else if (i == 13) {
      // Adds two components after adjusting the pH, never switches the mixer
      // on and forgets the laminar flow cabinet; clean from phase 2 on.
      out.push_back(scripted(c, id, start, {"f1t12", "f1t13", "f1t19", "f1t22"}, {{"f1t14", {"f1t12", "f1t13"}}}));
    } else if (i == 27) {
      // Forgets one component of every mixture.
      out.push_back(scripted(c, id, start, {"f1t16", "f2t37", "f3t35"}, {}));
    } else {
      GenerationProfile p = noisy_profile();
      if (std::find(skip_gloves.begin(), skip_gloves.end(), i) != skip_gloves.end()) p.skip_overrides["f0t8"] = 1.0;
      // f2t56 is the blocked PCR start's prerequisite; some students try early.
      p.swap_probability = i % 5 == 0 ? 0.03 : 0.01;
      auto actions = generate_student_actions(c, p, id, start, rng);
      if (p.skip_overrides["f0t8"] == 0.0) {
        // A swap must not make anyone else forget the gloves.
        auto gloves = std::find_if(actions.begin(), actions.end(), [](const RawAction& a) { return a.action_code == "f0t8"; });
        auto beaker = std::find_if(actions.begin(), actions.end(), [](const RawAction& a) { return a.action_code == "f1t1"; });
        if (gloves != actions.end() && beaker != actions.end() && beaker < gloves) {
          std::swap(gloves->action_code, beaker->action_code);
        }
      }
      if (i % 4 == 1) {
        // Starts the PCR machine before loading the tube.
        auto it = std::find_if(actions.begin(), actions.end(), [](const RawAction& a) { return a.action_code == "f2t56"; });
        if (it != actions.end()) {
          RawAction early = *it;
          early.action_code = "f2t57";
          it = actions.insert(it, early);
          for (auto j = it + 1; j != actions.end(); ++j) j->timestamp += std::chrono::seconds{30};
        }
      }
      out.push_back(std::move(actions));
    }
  }
  return out;
}

std::vector<StudentLog> demo_corpus(const AssignmentConfig& c) {
  std::vector<StudentLog> logs;
  std::mt19937_64 rng(1987);
  for (auto& actions : demo_raw_actions(c)) logs.push_back(finish(std::move(actions), c, rng));
  return logs;
}

std::vector<StudentLog> two_population_corpus(const AssignmentConfig& c) {
  std::vector<StudentLog> logs;
  std::mt19937_64 rng(2);
  // Careful students slip once, just before the end. The other population
  // goes wrong on the first action. Each zone count gets independent noise.
  GenerationProfile good;
  good.repeat_probability = 0.02;
  good.wrong_phase_probability = 0.01;
  good.wrong_action_probability = 0.015;
  good.leading_distractors = 1.5;
  good.trailing_distractors = 3.0;
  good.force_error = true;
  good.force_error_from = c.correct_flow.size() - 2;
  for (const auto& a : c.actions) {
    bool harmful = false;
    for (const auto& other : c.actions) {
      harmful = harmful || std::find(other.incompatibilities.begin(), other.incompatibilities.end(), a.code) !=
                               other.incompatibilities.end();
    }
    if (!c.flow_index(a.code) && !harmful) good.distractors.push_back(a.code);
  }
  GenerationProfile bad = good;
  bad.skip_probability = 0.01;
  bad.leading_distractors = 3.0;
  bad.trailing_distractors = 0.0;
  bad.force_error_from = 0;
  bad.force_error_before = 1;
  char buf[16];
  for (std::size_t i = 1; i <= 30; ++i) {
    for (const bool careful : {true, false}) {
      const std::string id = two_digit(buf, sizeof buf, careful ? "g" : "b", i);
      const Timestamp start = day(2014, 10, 1) + std::chrono::days{static_cast<long>(i)};
      logs.push_back(finish(generate_student_actions(c, careful ? good : bad, id, start, rng), c, rng));
    }
  }
  return logs;
}

std::vector<StudentLog> two_period_corpus(const AssignmentConfig& c) {
  std::vector<StudentLog> logs;
  std::mt19937_64 rng(2016);

  // Which students of each period skip the agar.
  auto chosen = [&](std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<bool> mark(n, false);
    for (std::size_t i = 0; i < k; ++i) mark[idx[i]] = true;
    return mark;
  };
  const auto agar_a = chosen(68, 45);
  const auto agar_b = chosen(17, 7);

  GenerationProfile before;
  before.skip_probability = 0.01;
  before.repeat_probability = 0.04;
  before.wrong_action_probability = 0.01;
  before.skip_overrides = {{"f1t14", 0.6}, {"f1t12", 0.3}, {"f1t13", 0.3}, {"f2t37", 0.45}, {"f2t40", 0.4},
                           {"f3t34", 0.35}, {"f3t35", 0.35}, {"f2t45", 0.05}, {"f3t50", 0.05}};
  GenerationProfile after = before;
  after.skip_overrides = {{"f1t14", 0.25}, {"f1t12", 0.1}, {"f1t13", 0.1}, {"f2t37", 0.15}, {"f2t40", 0.1},
                          {"f3t34", 0.1},  {"f3t35", 0.1}, {"f2t45", 0.05}, {"f3t50", 0.05}};

  char buf[16];
  for (std::size_t i = 0; i < 85; ++i) {
    const bool first = i < 68;
    GenerationProfile p = first ? before : after;
    const bool agar = first ? agar_a[i] : agar_b[i - 68];
    p.skip_overrides["f1t16"] = agar ? 1.0 : 0.0;
    p.skip_overrides["f1t20"] = 0.0;
    p.skip_overrides["f1t15"] = 0.0;
    p.skip_overrides["f1t17"] = 0.0;
    const std::string id = two_digit(buf, sizeof buf, "p", i + 1);
    const Timestamp start = first ? day(2013, 2, 4) + std::chrono::days{15 * static_cast<long>(i)}
                                  : day(2016, 2, 1) + std::chrono::days{14 * static_cast<long>(i - 68)};
    logs.push_back(finish(generate_student_actions(c, p, id, start, rng), c, rng));
  }
  return logs;
}

ChangeMap two_period_changes() {
  ChangeMap m = {{"f1t20_f1t14", "C1"}, {"f1t20_f1t12", "C2"}, {"f1t20_f1t13", "C2"}, {"f1t20_f1t16", "C7"},
                 {"f1t25_faileddrop", "C3"}};
  for (int t = 34; t <= 41; ++t) m["f2t52_" + code(2, t)] = "C4";
  for (int t = 33; t <= 37; ++t) m["f3t52_" + code(3, t)] = "C5";
  m["f2t52_f2t37"] = "C8";
  m["f2t52_f2t40"] = "C9";
  m["f3t52_f3t35"] = "C10";
  m["f3t52_f3t34"] = "C11";
  return m;
}

}  // namespace csm
