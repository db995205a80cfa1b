#ifndef CAUSAL_NECO_H
#define CAUSAL_NECO_H

/* Generated by cbindgen. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum NecoStatus {
  NECO_STATUS_OK = 0,
  NECO_STATUS_NULL_POINTER = 1,
  NECO_STATUS_INVALID_ARGUMENT = 2,
  NECO_STATUS_DATA_ERROR = 3,
  NECO_STATUS_NUMERICAL_ERROR = 4,
  NECO_STATUS_FIT_ERROR = 5,
  NECO_STATUS_IO_ERROR = 6,
  NECO_STATUS_PANIC = 7,
} NecoStatus;

// Causal graph handle.
typedef struct NecoGraph NecoGraph;

// Fitted structural model ensemble handle.
typedef struct NecoModel NecoModel;

// Return panel handle.
typedef struct NecoPanel NecoPanel;

// Outcome of a backtest statistic.
typedef struct NecoTestResult {
  double statistic;
  double pvalue;
  bool accept;
  bool degenerate;
} NecoTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *neco_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *neco_version(void);

// # Safety
// `s` must come from a `neco_*` function returning `char *` and not be freed twice.
void neco_string_free(char *s);

// Reads a panel CSV (`date,<label>,...`). With `prices` set the cells are
// prices and are converted to log-returns.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NecoStatus neco_panel_from_csv(const char *path, bool prices, struct NecoPanel **out);

// Builds a panel from a row-major `n_obs × n_instruments` return matrix
// with labels X1..Xp and synthetic daily dates.
//
// # Safety
// `data` must point to `n_obs * n_instruments` readable doubles.
enum NecoStatus neco_panel_from_matrix(const double *data,
                                       size_t n_obs,
                                       size_t n_instruments,
                                       struct NecoPanel **out);

// # Safety
// `panel` must be a live handle or NULL.
size_t neco_panel_n_obs(const struct NecoPanel *panel);

// # Safety
// `panel` must be a live handle or NULL.
size_t neco_panel_n_instruments(const struct NecoPanel *panel);

// # Safety
// `panel` must come from a panel constructor and not be freed twice.
void neco_panel_free(struct NecoPanel *panel);

// PC-stable discovery on the copula scores of `panel`.
//
// # Safety
// `panel` must be a live handle; `out` must be writable.
enum NecoStatus neco_discover(const struct NecoPanel *panel,
                              double alpha_ci,
                              struct NecoGraph **out);

// Parses a graph from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum NecoStatus neco_graph_from_json(const char *json, struct NecoGraph **out);

// # Safety
// `graph` must be a live handle or NULL.
size_t neco_graph_n_edges(const struct NecoGraph *graph);

// JSON form of the graph; free with `neco_string_free`. NULL on failure.
//
// # Safety
// `graph` must be a live handle or NULL.
char *neco_graph_to_json(const struct NecoGraph *graph);

// # Safety
// `graph` must come from a graph constructor and not be freed twice.
void neco_graph_free(struct NecoGraph *graph);

// Fits the structural model with `lags` own lags on the copula scores of
// `panel` given `graph`.
//
// # Safety
// `panel` and `graph` must be live handles; `out` must be writable.
enum NecoStatus neco_fit(const struct NecoPanel *panel,
                         const struct NecoGraph *graph,
                         size_t lags,
                         struct NecoModel **out);

// Number of DAGs in the fitted ensemble.
//
// # Safety
// `model` must be a live handle or NULL.
size_t neco_model_n_members(const struct NecoModel *model);

// Market NECOF of the primary model; per-node values go to `per_node`
// when it is non-NULL and holds `len >= p` doubles.
//
// # Safety
// `model` must be a live handle; `market` must be writable.
enum NecoStatus neco_model_necof(const struct NecoModel *model,
                                 double *market,
                                 double *per_node,
                                 size_t len);

// JSON form of the primary model; free with `neco_string_free`.
//
// # Safety
// `model` must be a live handle or NULL.
char *neco_model_to_json(const struct NecoModel *model);

// # Safety
// `model` must come from `neco_fit` and not be freed twice.
void neco_model_free(struct NecoModel *model);

// One-step-ahead Causal-NECO VaR after the last row of `panel`, using a
// model fitted on the same panel. Writes one value per instrument.
//
// # Safety
// `panel` and `model` must be live handles; `out` must hold `len` doubles.
enum NecoStatus neco_forecast_var(const struct NecoPanel *panel,
                                  const struct NecoModel *model,
                                  double alpha,
                                  double *out,
                                  size_t len);

// Variance-covariance VaR over the whole panel.
//
// # Safety
// `panel` must be a live handle; `out` must hold `len` doubles.
enum NecoStatus neco_varcovar_var(const struct NecoPanel *panel,
                                  double alpha,
                                  double *out,
                                  size_t len);

// Kupiec unconditional coverage test on a 0/1 hit series.
//
// # Safety
// `hits` must point to `n` bytes; `out` must be writable.
enum NecoStatus neco_kupiec(const uint8_t *hits,
                            size_t n,
                            double alpha,
                            struct NecoTestResult *out);

// Christoffersen conditional coverage test on a 0/1 hit series.
//
// # Safety
// `hits` must point to `n` bytes; `out` must be writable.
enum NecoStatus neco_christoffersen(const uint8_t *hits,
                                    size_t n,
                                    double alpha,
                                    struct NecoTestResult *out);

// Dynamic quantile test with `n_lags` lagged hits and the VaR level.
//
// # Safety
// `hits` and `var` must point to `n` elements; `out` must be writable.
enum NecoStatus neco_dq(const uint8_t *hits,
                        const double *var,
                        size_t n,
                        double alpha,
                        size_t n_lags,
                        struct NecoTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAUSAL_NECO_H */
