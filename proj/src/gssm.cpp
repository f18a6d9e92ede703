#include "hybrid/gssm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

namespace hybrid {

StateMachine::StateMachine(std::size_t num_states, StateId initial, std::vector<Token> alphabet,
                           std::vector<StateId> update, std::vector<Token> readout,
                           std::size_t output_rows)
    : num_states_(num_states),
      initial_(initial),
      alphabet_(std::move(alphabet)),
      update_(std::move(update)),
      readout_(std::move(readout)),
      output_rows_(output_rows) {
  if (num_states_ == 0) throw SpecError("StateMachine: needs at least one state");
  if (output_rows_ == 0) throw SpecError("StateMachine: needs at least one output row");
  if (initial_ < 0 || static_cast<std::size_t>(initial_) >= num_states_) {
    throw SpecError("StateMachine: initial state out of range");
  }
  if (alphabet_.empty()) throw SpecError("StateMachine: empty alphabet");
  // Keep the table aligned with a sorted alphabet.
  std::vector<std::size_t> order(alphabet_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return alphabet_[a] < alphabet_[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (alphabet_[order[i]] == alphabet_[order[i - 1]]) throw SpecError("StateMachine: duplicate token in alphabet");
  }
  if (update_.size() != num_states_ * alphabet_.size()) {
    throw DimensionError("StateMachine: update table must have |S| * |alphabet| entries");
  }
  if (readout_.size() != num_states_ * output_rows_) {
    throw DimensionError("StateMachine: readout table must have |S| * rows entries");
  }
  for (StateId s : update_) {
    if (s < 0 || static_cast<std::size_t>(s) >= num_states_) throw SpecError("StateMachine: update target out of range");
  }
  if (!std::is_sorted(alphabet_.begin(), alphabet_.end())) {
    std::vector<Token> sorted_alpha(alphabet_.size());
    std::vector<StateId> sorted_update(update_.size());
    const std::size_t a = alphabet_.size();
    for (std::size_t i = 0; i < a; ++i) sorted_alpha[i] = alphabet_[order[i]];
    for (std::size_t s = 0; s < num_states_; ++s)
      for (std::size_t i = 0; i < a; ++i) sorted_update[s * a + i] = update_[s * a + order[i]];
    alphabet_ = std::move(sorted_alpha);
    update_ = std::move(sorted_update);
  }
}

bool StateMachine::accepts(Token tok) const {
  return std::binary_search(alphabet_.begin(), alphabet_.end(), tok);
}

std::size_t StateMachine::index_of(Token tok) const {
  const auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), tok);
  if (it == alphabet_.end() || *it != tok) {
    throw AlphabetError("token " + std::to_string(tok) + " is outside the machine's alphabet");
  }
  return static_cast<std::size_t>(it - alphabet_.begin());
}

StateId StateMachine::step(StateId s, Token tok) const {
  return update_[static_cast<std::size_t>(s) * alphabet_.size() + index_of(tok)];
}

Token StateMachine::read(StateId s, std::size_t row) const {
  return readout_[static_cast<std::size_t>(s) * output_rows_ + row];
}

std::vector<Token> StateMachine::output_alphabet(std::size_t row) const {
  std::set<Token> out;
  for (std::size_t s = 0; s < num_states_; ++s) out.insert(read(static_cast<StateId>(s), row));
  return {out.begin(), out.end()};
}

RunResult gssm_run(const StateMachine& sm, std::span<const Token> seq) {
  RunResult res;
  res.rows.assign(sm.output_rows(), std::vector<Token>{});
  for (auto& r : res.rows) r.reserve(seq.size());
  res.states.reserve(seq.size());
  StateId s = sm.initial();
  for (Token tok : seq) {
    s = sm.step(s, tok);
    res.states.push_back(s);
    for (std::size_t k = 0; k < sm.output_rows(); ++k) res.rows[k].push_back(sm.read(s, k));
  }
  res.final_state = s;
  return res;
}

StateMachine collapse(std::span<const StateMachine> layers) {
  if (layers.empty()) throw CompositionError("collapse: no layers");
  for (std::size_t j = 0; j + 1 < layers.size(); ++j) {
    if (layers[j].output_rows() != 1) throw CompositionError("collapse: layers must have a single output row");
    for (Token t : layers[j].output_alphabet()) {
      if (!layers[j + 1].accepts(t)) {
        throw CompositionError("collapse: layer " + std::to_string(j + 2) + " cannot read output " +
                               std::to_string(t) + " of layer " + std::to_string(j + 1));
      }
    }
  }
  const auto& alphabet = layers.front().alphabet();
  const std::size_t k = layers.size();

  // Breadth-first over reachable tuples; ids in discovery order.
  std::map<std::vector<StateId>, StateId> ids;
  std::vector<std::vector<StateId>> tuples;
  std::vector<StateId> start(k);
  for (std::size_t j = 0; j < k; ++j) start[j] = layers[j].initial();
  ids.emplace(start, 0);
  tuples.push_back(start);

  std::vector<StateId> update;
  for (std::size_t head = 0; head < tuples.size(); ++head) {
    for (Token x : alphabet) {
      std::vector<StateId> next(k);
      Token feed = x;
      for (std::size_t j = 0; j < k; ++j) {
        next[j] = layers[j].step(tuples[head][j], feed);
        feed = layers[j].read(next[j]);
      }
      auto [it, inserted] = ids.emplace(next, static_cast<StateId>(tuples.size()));
      if (inserted) tuples.push_back(next);
      update.push_back(it->second);
    }
  }
  std::vector<Token> readout;
  readout.reserve(tuples.size());
  for (const auto& t : tuples) readout.push_back(layers.back().read(t.back()));
  return StateMachine(tuples.size(), 0, alphabet, std::move(update), std::move(readout), 1);
}

StateMachine merge(const StateMachine& u, const StateMachine& v) {
  if (u.alphabet() != v.alphabet()) throw CompositionError("merge: machines read different alphabets");
  const std::size_t nu = u.num_states();
  const std::size_t nv = v.num_states();
  const auto& alphabet = u.alphabet();
  const std::size_t rows = u.output_rows() + v.output_rows();
  std::vector<StateId> update;
  update.reserve(nu * nv * alphabet.size());
  std::vector<Token> readout;
  readout.reserve(nu * nv * rows);
  for (std::size_t su = 0; su < nu; ++su) {
    for (std::size_t sv = 0; sv < nv; ++sv) {
      for (Token x : alphabet) {
        const auto nu_state = static_cast<std::size_t>(u.step(static_cast<StateId>(su), x));
        const auto nv_state = static_cast<std::size_t>(v.step(static_cast<StateId>(sv), x));
        update.push_back(static_cast<StateId>(nu_state * nv + nv_state));
      }
      for (std::size_t r = 0; r < u.output_rows(); ++r) readout.push_back(u.read(static_cast<StateId>(su), r));
      for (std::size_t r = 0; r < v.output_rows(); ++r) readout.push_back(v.read(static_cast<StateId>(sv), r));
    }
  }
  const auto initial = static_cast<StateId>(static_cast<std::size_t>(u.initial()) * nv +
                                            static_cast<std::size_t>(v.initial()));
  return StateMachine(nu * nv, initial, alphabet, std::move(update), std::move(readout), rows);
}

double mem_bits(const StateMachine& sm) { return std::log2(static_cast<double>(sm.num_states())); }

nlohmann::json to_json(const StateMachine& sm) {
  nlohmann::json update = nlohmann::json::array();
  nlohmann::json readout = nlohmann::json::array();
  const std::size_t a = sm.alphabet().size();
  for (std::size_t s = 0; s < sm.num_states(); ++s) {
    update.push_back(std::vector<StateId>(sm.update_table().begin() + static_cast<std::ptrdiff_t>(s * a),
                                          sm.update_table().begin() + static_cast<std::ptrdiff_t>((s + 1) * a)));
    const std::size_t r = sm.output_rows();
    readout.push_back(std::vector<Token>(sm.readout_table().begin() + static_cast<std::ptrdiff_t>(s * r),
                                         sm.readout_table().begin() + static_cast<std::ptrdiff_t>((s + 1) * r)));
  }
  return {{"format", "gssm/1"},
          {"states", sm.num_states()},
          {"s0", sm.initial()},
          {"alphabet", sm.alphabet()},
          {"output_rows", sm.output_rows()},
          {"update", update},
          {"readout", readout}};
}

StateMachine state_machine_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "gssm/1") throw FormatError("state machine: unknown format");
    const auto n = j.at("states").get<std::size_t>();
    const auto rows = j.value("output_rows", std::size_t{1});
    std::vector<StateId> update;
    std::vector<Token> readout;
    const auto& u = j.at("update");
    const auto& r = j.at("readout");
    if (u.size() != n || r.size() != n) throw FormatError("state machine: table row count != states");
    for (const auto& row : u)
      for (const auto& v : row) update.push_back(v.get<StateId>());
    for (const auto& row : r)
      for (const auto& v : row) readout.push_back(v.get<Token>());
    return StateMachine(n, j.at("s0").get<StateId>(), j.at("alphabet").get<std::vector<Token>>(),
                        std::move(update), std::move(readout), rows);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("state machine JSON: ") + e.what());
  }
}

}  // namespace hybrid

namespace hybrid {

StateMachine random_machine(std::size_t num_states, std::vector<Token> alphabet, std::span<const Token> outputs,
                            Rng& rng) {
  if (num_states == 0 || outputs.empty()) throw SpecError("random machine: need states and outputs");
  std::vector<StateId> update(num_states * alphabet.size());
  for (auto& s : update) s = static_cast<StateId>(rng.below(num_states));
  std::vector<Token> readout(num_states);
  for (auto& r : readout) r = outputs[rng.below(outputs.size())];
  return StateMachine(num_states, 0, std::move(alphabet), std::move(update), std::move(readout));
}

StateMachine shift_register_machine(std::span<const Token> tracked, std::size_t m, std::span<const Token> others) {
  if (tracked.empty() || m == 0) throw SpecError("shift register: need symbols and m >= 1");
  const std::size_t a = tracked.size();
  std::size_t n = 1;
  for (std::size_t i = 0; i < m; ++i) n *= a;
  std::vector<Token> alphabet(tracked.begin(), tracked.end());
  alphabet.insert(alphabet.end(), others.begin(), others.end());
  std::vector<StateId> update(n * alphabet.size());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < alphabet.size(); ++t) {
      update[s * alphabet.size() + t] = static_cast<StateId>(t < a ? (s * a + t) % n : s);
    }
  }
  std::vector<Token> readout(n);
  for (std::size_t s = 0; s < n; ++s) readout[s] = tracked[s % a];
  return StateMachine(n, 0, std::move(alphabet), std::move(update), std::move(readout));
}

}  // namespace hybrid
