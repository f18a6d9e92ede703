#include "hybrid/tasks.hpp"

#include <istream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>

#include "hybrid/parallel.hpp"

namespace hybrid {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::uniform: return "uniform";
    case Variant::ds: return "ds";
    case Variant::dt: return "dt";
    case Variant::mixture: return "mixture";
  }
  return "?";
}

Variant variant_from_string(const std::string& name) {
  if (name == "uniform") return Variant::uniform;
  if (name == "ds" || name == "D_S") return Variant::ds;
  if (name == "dt" || name == "D_T") return Variant::dt;
  if (name == "mixture" || name == "D") return Variant::mixture;
  throw SpecError("unknown distribution '" + name + "'");
}

DistributionSpec DistributionSpec::defaults(TaskKind task) {
  DistributionSpec s;
  s.task = task;
  switch (task) {
    case TaskKind::selective_copy: s.length = 100; break;
    case TaskKind::ard: s.length = 512; break;
    case TaskKind::mkar: s.length = 100; break;
    case TaskKind::nh: s.length = 100; break;
  }
  return s;
}

void DistributionSpec::validate() const {
  auto fail = [](const std::string& what) { throw SpecError(what); };
  if (length < 2) fail("length must be at least 2");
  switch (task) {
    case TaskKind::selective_copy: {
      if (number_min < 1 || number_max < number_min) fail("selective copy: need 1 <= number_min <= number_max");
      if (static_cast<std::size_t>(number_max) > length) fail("selective copy: number values must not exceed L");
      if (word_count < 1) fail("selective copy: need at least one word");
      if (variant == Variant::ds || variant == Variant::mixture) {
        if (ds_number_min > number_max) fail("selective copy: D_S has no eligible number token");
      }
      if (variant == Variant::dt || variant == Variant::mixture) {
        // prefix 1..floor(L/2)-1 must fit a number token
        if (length / 2 < 2) fail("selective copy: D_T needs L >= 4");
        // a lookback that lands past the last prefix number must stay in range
        if (static_cast<std::size_t>(number_max) > length) fail("selective copy: lookback past the sequence start");
      }
      break;
    }
    case TaskKind::ard: {
      if (bit_width < 1 || bit_width > 20) fail("ard: bit_width must be in 1..20");
      if (length < static_cast<std::size_t>(bit_width) + 2) fail("ard: length too short for the key bits");
      if (variant != Variant::uniform) {
        if (bit_width < 2) fail("ard: hard form needs bit_width >= 2");
        if ((length - static_cast<std::size_t>(bit_width)) % 2 != 0) {
          fail("ard: hard form needs L - bit_width even to tile (alpha, beta) pairs");
        }
      }
      break;
    }
    case TaskKind::mkar:
      if (variant != Variant::uniform) fail("mkar: only the uniform distribution exists");
      if (key_length < 1 || vocab_size < 1) fail("mkar: key_length and vocab_size must be positive");
      if (length < static_cast<std::size_t>(key_length) + 2) fail("mkar: length too short for the query");
      break;
    case TaskKind::nh:
      if (variant != Variant::uniform) fail("nh: only the uniform distribution exists");
      if (haystack_size < 1) fail("nh: haystack vocabulary must be nonempty");
      if (length < 3) fail("nh: length must be at least 3");
      break;
  }
}

Vocabulary DistributionSpec::vocabulary() const {
  switch (task) {
    case TaskKind::selective_copy: {
      std::vector<int> values(static_cast<std::size_t>(number_max - number_min + 1));
      std::iota(values.begin(), values.end(), number_min);
      return Vocabulary::selective_copy(values, word_count);
    }
    case TaskKind::ard: return Vocabulary::ard(bit_width);
    case TaskKind::mkar: return Vocabulary::plain(vocab_size);
    case TaskKind::nh: return Vocabulary::needle(haystack_size);
  }
  throw SpecError("unknown task");
}

nlohmann::json to_json(const DistributionSpec& s) {
  return {{"task", to_string(s.task)},        {"dist", to_string(s.variant)},
          {"length", s.length},              {"number_min", s.number_min},
          {"number_max", s.number_max},      {"word_count", s.word_count},
          {"ds_number_min", s.ds_number_min}, {"bit_width", s.bit_width},
          {"key_length", s.key_length},      {"vocab_size", s.vocab_size},
          {"haystack_size", s.haystack_size}};
}

DistributionSpec distribution_from_json(const nlohmann::json& j) {
  try {
    auto s = DistributionSpec::defaults(task_from_string(j.at("task").get<std::string>()));
    if (j.contains("dist")) s.variant = variant_from_string(j["dist"].get<std::string>());
    auto opt = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    opt("length", s.length);
    opt("number_min", s.number_min);
    opt("number_max", s.number_max);
    opt("word_count", s.word_count);
    opt("ds_number_min", s.ds_number_min);
    opt("bit_width", s.bit_width);
    opt("key_length", s.key_length);
    opt("vocab_size", s.vocab_size);
    opt("haystack_size", s.haystack_size);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("distribution JSON: ") + e.what());
  }
}

Token oracle_selective_copy(std::span<const Token> seq, const Vocabulary& vocab) {
  for (std::size_t i = seq.size(); i-- > 0;) {
    if (!vocab.is(seq[i], TokenKind::number)) continue;
    const int k = vocab.value(seq[i]);
    if (k < 1 || static_cast<std::size_t>(k) > seq.size()) {
      throw RangeError("selective copy: lookback " + std::to_string(k) + " out of range");
    }
    return seq[seq.size() - static_cast<std::size_t>(k)];
  }
  throw UndefinedInputError("selective copy: no number token in the sequence");
}

Token oracle_ard(std::span<const Token> seq, const Vocabulary& vocab, int bit_width) {
  std::uint64_t key = 0;
  int bits = 0;
  for (Token t : seq) {
    if (vocab.is(t, TokenKind::bit)) {
      key = (key << 1) | static_cast<std::uint64_t>(vocab.value(t));
      ++bits;
    }
  }
  if (bits != bit_width) {
    throw UndefinedInputError("ard: expected " + std::to_string(bit_width) + " bit tokens, found " +
                              std::to_string(bits));
  }
  const auto key_tok = static_cast<Token>(key);
  for (std::size_t i = seq.size() - 1; i-- > 0;) {
    if (seq[i] == key_tok && vocab.is(seq[i], TokenKind::word)) return seq[i + 1];
  }
  throw UndefinedInputError("ard: key word never occurs before the last position");
}

Token oracle_mkar(std::span<const Token> seq, int k) {
  const auto uk = static_cast<std::size_t>(k);
  if (k < 1 || seq.size() < uk + 1) throw UndefinedInputError("mkar: sequence shorter than the query");
  const std::size_t q = seq.size() - uk;
  for (std::size_t i = q; i-- > 0;) {
    if (std::equal(seq.begin() + static_cast<std::ptrdiff_t>(i), seq.begin() + static_cast<std::ptrdiff_t>(i + uk),
                   seq.begin() + static_cast<std::ptrdiff_t>(q))) {
      return seq[i + uk];
    }
  }
  throw UndefinedInputError("mkar: query does not occur earlier");
}

Token oracle_nh(std::span<const Token> seq, const Vocabulary& vocab) {
  const Token needle = vocab.marker(0);
  std::size_t found = seq.size();
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    if (seq[i] != needle) continue;
    if (found != seq.size()) throw SpecError("nh: more than one needle marker");
    found = i;
  }
  if (found == seq.size()) throw SpecError("nh: no needle marker in positions 1..L-1");
  return seq[found + 1];
}

TaskSampler::TaskSampler(DistributionSpec spec) : spec_(spec) {
  spec_.validate();
  vocab_ = spec_.vocabulary();
  numbers_ = vocab_.tokens_of(TokenKind::number);
  words_ = vocab_.tokens_of(TokenKind::word);
  for (Token t : numbers_) {
    if (vocab_.value(t) >= spec_.ds_number_min) ds_numbers_.push_back(t);
  }
}

Token TaskSampler::uniform_token(Rng& rng) const { return static_cast<Token>(rng.below(vocab_.size())); }

Token TaskSampler::pick(Rng& rng, const std::vector<Token>& from) const { return from[rng.below(from.size())]; }

Sequence TaskSampler::draw_selective_copy(Rng& rng, Variant v) const {
  const std::size_t L = spec_.length;
  Sequence seq(L);
  auto has_number = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      if (vocab_.is(seq[i], TokenKind::number)) return true;
    }
    return false;
  };
  switch (v) {
    case Variant::uniform:
      for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        for (auto& t : seq) t = uniform_token(rng);
        if (has_number(0, L)) return seq;
      }
      break;
    case Variant::ds:
      for (std::size_t i = 0; i + 1 < L; ++i) seq[i] = uniform_token(rng);
      seq[L - 1] = pick(rng, ds_numbers_);
      return seq;
    case Variant::dt: {
      const std::size_t half = L / 2;  // suffix is positions half..L (1-based)
      for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        for (std::size_t i = 0; i + 1 < half; ++i) seq[i] = uniform_token(rng);
        for (std::size_t i = half - 1; i < L; ++i) seq[i] = pick(rng, words_);
        if (has_number(0, half - 1)) return seq;
      }
      break;
    }
    case Variant::mixture: break;
  }
  throw SpecError("selective copy: rejection sampling exhausted its retries");
}

Sequence TaskSampler::draw_ard(Rng& rng, Variant v) const {
  const std::size_t L = spec_.length;
  const auto bw = static_cast<std::size_t>(spec_.bit_width);
  const std::size_t nwords = L - bw;
  const auto word_count = static_cast<Token>(words_.size());
  Sequence words(nwords);
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    Token key;
    if (v == Variant::uniform) {
      for (auto& t : words) t = pick(rng, words_);
      key = pick(rng, words_);
    } else {
      // alpha half of the words, then beta half
      const Token half = word_count / 2;
      for (std::size_t i = 0; i < nwords; i += 2) {
        words[i] = static_cast<Token>(rng.below(static_cast<std::uint64_t>(half)));
        words[i + 1] = static_cast<Token>(half + static_cast<Token>(rng.below(static_cast<std::uint64_t>(half))));
      }
      key = static_cast<Token>(rng.below(static_cast<std::uint64_t>(half)));
    }
    if (std::find(words.begin(), words.end(), key) == words.end()) continue;
    Sequence bits(bw);
    for (std::size_t b = 0; b < bw; ++b) bits[b] = vocab_.bit(static_cast<int>((key >> (bw - 1 - b)) & 1));
    Sequence seq;
    seq.reserve(L);
    if (v == Variant::dt) {
      seq.insert(seq.end(), bits.begin(), bits.end());
      seq.insert(seq.end(), words.begin(), words.end());
    } else {
      seq.insert(seq.end(), words.begin(), words.end());
      seq.insert(seq.end(), bits.begin(), bits.end());
    }
    return seq;
  }
  throw SpecError("ard: key never occurred within the retry budget");
}

Sequence TaskSampler::draw_mkar(Rng& rng) const {
  Sequence seq(spec_.length);
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    for (auto& t : seq) t = uniform_token(rng);
    try {
      oracle_mkar(seq, spec_.key_length);
      return seq;
    } catch (const UndefinedInputError&) {
    }
  }
  throw SpecError("mkar: query never recurred within the retry budget");
}

Sequence TaskSampler::draw_nh(Rng& rng) const {
  const std::size_t L = spec_.length;
  Sequence seq(L);
  for (std::size_t i = 0; i + 1 < L; ++i) seq[i] = pick(rng, words_);
  seq[rng.below(L - 2)] = vocab_.marker(0);
  seq[L - 1] = vocab_.marker(1);
  return seq;
}

TaskInstance TaskSampler::draw(Rng& rng) const {
  TaskInstance inst;
  inst.task = spec_.task;
  inst.dist = spec_.variant;
  inst.component = spec_.variant;
  if (spec_.variant == Variant::mixture) inst.component = rng.coin() ? Variant::dt : Variant::ds;
  switch (spec_.task) {
    case TaskKind::selective_copy: inst.tokens = draw_selective_copy(rng, inst.component); break;
    case TaskKind::ard: inst.tokens = draw_ard(rng, inst.component); break;
    case TaskKind::mkar: inst.tokens = draw_mkar(rng); break;
    case TaskKind::nh: inst.tokens = draw_nh(rng); break;
  }
  inst.target = oracle(inst.tokens);
  return inst;
}

Token TaskSampler::oracle(std::span<const Token> seq) const {
  switch (spec_.task) {
    case TaskKind::selective_copy: return oracle_selective_copy(seq, vocab_);
    case TaskKind::ard: return oracle_ard(seq, vocab_, spec_.bit_width);
    case TaskKind::mkar: return oracle_mkar(seq, spec_.key_length);
    case TaskKind::nh: return oracle_nh(seq, vocab_);
  }
  throw SpecError("unknown task");
}

std::vector<TaskInstance> generate_dataset(const DistributionSpec& spec, std::size_t n, std::uint64_t seed,
                                           unsigned threads) {
  const TaskSampler sampler(spec);
  std::vector<TaskInstance> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng = Rng::substream(seed, i);
    out[i] = sampler.draw(rng);
    out[i].seed = seed;
    out[i].index = i;
  });
  return out;
}

nlohmann::json to_json(const TaskInstance& inst) {
  nlohmann::json j = {{"tokens", inst.tokens},
                      {"target", inst.target},
                      {"task", to_string(inst.task)},
                      {"dist", to_string(inst.dist)},
                      {"seed", inst.seed},
                      {"index", inst.index}};
  if (inst.dist == Variant::mixture) j["component"] = to_string(inst.component);
  return j;
}

TaskInstance instance_from_json(const nlohmann::json& j) {
  try {
    TaskInstance inst;
    inst.tokens = j.at("tokens").get<Sequence>();
    inst.target = j.at("target").get<Token>();
    inst.task = task_from_string(j.at("task").get<std::string>());
    inst.dist = variant_from_string(j.at("dist").get<std::string>());
    inst.component = j.contains("component") ? variant_from_string(j["component"].get<std::string>()) : inst.dist;
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.index = j.value("index", std::uint64_t{0});
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("instance JSON: ") + e.what());
  }
}

void write_jsonl(std::ostream& out, std::span<const TaskInstance> data) {
  for (const auto& inst : data) out << to_json(inst).dump() << '\n';
  if (!out) throw IoError("failed writing dataset");
}

std::vector<TaskInstance> read_jsonl(std::istream& in) {
  std::vector<TaskInstance> data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    data.push_back(instance_from_json(j));
  }
  return data;
}

}  // namespace hybrid
