#ifndef WCFG_H
#define WCFG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WcfgStatus {
  WCFG_STATUS_OK = 0,
  // The constraint has no solution; not an error.
  WCFG_STATUS_INFEASIBLE = 1,
  WCFG_STATUS_NULL_POINTER = 2,
  WCFG_STATUS_INVALID_UTF8 = 3,
  WCFG_STATUS_PARSE = 4,
  WCFG_STATUS_INVALID_ARGUMENT = 5,
  WCFG_STATUS_PANIC = 6,
} WcfgStatus;

typedef enum WcfgBackend {
  WCFG_BACKEND_MONOLITHIC = 0,
  WCFG_BACKEND_DECOMPOSITION = 1,
  WCFG_BACKEND_DECOMPOSITION_WITH_ENTAILMENT = 2,
} WcfgBackend;

// Opaque domain store handle.
typedef struct WcfgDomains WcfgDomains;

// Opaque grammar handle.
typedef struct WcfgGrammar WcfgGrammar;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *wcfg_last_error(void);

// Library version as a static NUL-terminated string.
const char *wcfg_version(void);

// Parses and validates a grammar in the text format.
//
// # Safety
// `source` must be a NUL-terminated string and `out` a valid pointer.
enum WcfgStatus wcfg_grammar_parse(const char *source, struct WcfgGrammar **out);

// # Safety
// `grammar` must come from [`wcfg_grammar_parse`] and not be freed twice.
void wcfg_grammar_free(struct WcfgGrammar *grammar);

// Alphabet size, or 0 for a null handle.
//
// # Safety
// `grammar` must be null or a live handle.
size_t wcfg_grammar_num_terminals(const struct WcfgGrammar *grammar);

// The grammar in the text format; free with [`wcfg_string_free`].
//
// # Safety
// `grammar` must be null or a live handle.
char *wcfg_grammar_to_string(const struct WcfgGrammar *grammar);

// Full domains of length `n` over the grammar alphabet.
//
// # Safety
// `grammar` must be a live handle and `out` a valid pointer.
enum WcfgStatus wcfg_domains_full(const struct WcfgGrammar *grammar,
                                  size_t n,
                                  struct WcfgDomains **out);

// Parses a domains file (`X<i>: a b c` per line) against the grammar
// alphabet.
//
// # Safety
// `grammar` must be a live handle, `source` a NUL-terminated string and
// `out` a valid pointer.
enum WcfgStatus wcfg_domains_parse(const struct WcfgGrammar *grammar,
                                   const char *source,
                                   struct WcfgDomains **out);

// # Safety
// `domains` must come from this library and not be freed twice.
void wcfg_domains_free(struct WcfgDomains *domains);

// Sequence length, or 0 for a null handle.
//
// # Safety
// `domains` must be null or a live handle.
size_t wcfg_domains_len(const struct WcfgDomains *domains);

// 1 if terminal `t` is in `D(X_i)`, `i` in `1..=len`, else 0.
//
// # Safety
// `domains` must be null or a live handle.
int32_t wcfg_domains_contains(const struct WcfgDomains *domains, size_t i, uint16_t t);

// Domains rendered as `X1={a} X2={b}`; free with [`wcfg_string_free`].
//
// # Safety
// Both handles must be null or live.
char *wcfg_domains_to_string(const struct WcfgDomains *domains, const struct WcfgGrammar *grammar);

// Enforces `WCFG(grammar, z)` on `domains`. On `WCFG_STATUS_OK` the pruned
// domains are written to `out` (a new handle) and the minimum derivation
// weight to `root_min` when non-null. `WCFG_STATUS_INFEASIBLE` leaves `out`
// null.
//
// # Safety
// Handles must be live; `out` must be valid; `root_min` may be null.
enum WcfgStatus wcfg_propagate(const struct WcfgGrammar *grammar,
                               const struct WcfgDomains *domains,
                               int64_t z,
                               enum WcfgBackend backend,
                               struct WcfgDomains **out,
                               int64_t *root_min);

// Minimizes a shift-scheduling instance given in the instance text format.
// Writes the best cost to `cost` (when non-null) and the solver log to
// `log` (when non-null; free with [`wcfg_string_free`]). A non-positive
// `time_limit_s` uses the instance's own limit.
//
// # Safety
// `source` must be a NUL-terminated string; `cost` and `log` may be null.
enum WcfgStatus wcfg_solve_instance(const char *source,
                                    enum WcfgBackend backend,
                                    double time_limit_s,
                                    int64_t *cost,
                                    char **log);

// # Safety
// `s` must be null or a string returned by this library, freed once.
void wcfg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WCFG_H */
