#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hybrid/embed.hpp"
#include "hybrid/rng.hpp"

namespace hybrid {

using StateId = std::int32_t;

/// Reserved output id emitted before a machine has anything meaningful to say.
inline constexpr Token kBottom = -1;

/// Finite generalized state-space machine with explicit transition tables.
///
/// States are dense ids 0..n-1. The update table is total over
/// states x alphabet; the readout table gives `output_rows` tokens per state
/// (one row for plain machines, two for a merge of two plain machines, ...).
class StateMachine {
 public:
  StateMachine() = default;
  StateMachine(std::size_t num_states, StateId initial, std::vector<Token> alphabet,
               std::vector<StateId> update, std::vector<Token> readout, std::size_t output_rows = 1);

  std::size_t num_states() const { return num_states_; }
  StateId initial() const { return initial_; }
  const std::vector<Token>& alphabet() const { return alphabet_; }
  std::size_t output_rows() const { return output_rows_; }

  bool accepts(Token tok) const;
  /// u(s, tok); throws AlphabetError for tokens outside the alphabet.
  StateId step(StateId s, Token tok) const;
  /// r(s) for output row `row`.
  Token read(StateId s, std::size_t row = 0) const;

  /// Sorted distinct tokens that row `row` of the readout can emit.
  std::vector<Token> output_alphabet(std::size_t row = 0) const;

  const std::vector<StateId>& update_table() const { return update_; }
  const std::vector<Token>& readout_table() const { return readout_; }

  friend bool operator==(const StateMachine&, const StateMachine&) = default;

 private:
  std::size_t index_of(Token tok) const;

  std::size_t num_states_ = 0;
  StateId initial_ = 0;
  std::vector<Token> alphabet_;   // sorted, distinct
  std::vector<StateId> update_;   // state-major: s * |alphabet| + a
  std::vector<Token> readout_;    // state-major: s * output_rows + row
  std::size_t output_rows_ = 1;
};

struct RunResult {
  /// rows[k][i] = row k of r(S_i), i = 1..L
  std::vector<std::vector<Token>> rows;
  std::vector<StateId> states;
  StateId final_state = 0;

  const std::vector<Token>& outputs() const { return rows.front(); }
};

RunResult gssm_run(const StateMachine& sm, std::span<const Token> seq);

/// Single machine over tuple states that behaves like running `layers` in
/// sequence, each layer consuming the previous layer's current output.
/// Only states reachable from the initial tuple are kept.
StateMachine collapse(std::span<const StateMachine> layers);

/// Product machine whose readout stacks the rows of `u` above the rows of `v`.
StateMachine merge(const StateMachine& u, const StateMachine& v);

/// Uniformly random update and readout tables; state 0 is initial.
StateMachine random_machine(std::size_t num_states, std::vector<Token> alphabet, std::span<const Token> outputs,
                            Rng& rng);

/// Remembers the last m symbols of `tracked` as a base-|tracked| number
/// (|tracked|^m states). Other alphabet tokens leave the state alone. Reads
/// out the most recent tracked symbol.
StateMachine shift_register_machine(std::span<const Token> tracked, std::size_t m, std::span<const Token> others);

/// log2 |S|
double mem_bits(const StateMachine& sm);

nlohmann::json to_json(const StateMachine& sm);
StateMachine state_machine_from_json(const nlohmann::json& j);

}  // namespace hybrid
