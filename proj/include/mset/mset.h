#ifndef MSET_H
#define MSET_H

/* C interface to the MSET simulator. Every handle is opaque; functions that
 * can fail return an mset_status and leave a message in mset_last_error(). */

#include <stddef.h>

#if defined(_WIN32)
#define MSET_API __declspec(dllexport)
#else
#define MSET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mset_status {
    MSET_OK = 0,
    MSET_ERR_VALIDATION = 1,  /* malformed or inconsistent config, device or netlist */
    MSET_ERR_IO = 2,
    MSET_ERR_CONVERGENCE = 3, /* device or circuit solve failed */
    MSET_ERR_ARGUMENT = 4,    /* null handle or out-of-range argument */
    MSET_ERR_INTERNAL = 5
} mset_status;

typedef struct mset_config mset_config;
typedef struct mset_op mset_op;
typedef struct mset_statemap mset_statemap;

typedef void (*mset_progress_fn)(size_t done, size_t total, void* user);
typedef void (*mset_warning_fn)(const char* message, void* user);

MSET_API const char* mset_version(void);
/* Message of the last failure on the calling thread; "" when none. */
MSET_API const char* mset_last_error(void);
/* Gummel trace CSV of the last convergence failure on the calling thread; "" when none. */
MSET_API const char* mset_last_trace_csv(void);
/* Routes library warnings to fn; NULL restores the default stderr sink. */
MSET_API void mset_set_warning_handler(mset_warning_fn fn, void* user);
/* Frees strings returned through char** out-parameters. */
MSET_API void mset_string_free(char* s);

MSET_API mset_status mset_config_load(const char* path, mset_config** out);
MSET_API mset_status mset_config_parse(const char* yaml_text, const char* base_dir, mset_config** out);
MSET_API void mset_config_free(mset_config* cfg);
MSET_API mset_status mset_config_set_output_dir(mset_config* cfg, const char* dir);
MSET_API mset_status mset_config_set_jobs(mset_config* cfg, int jobs);
MSET_API mset_status mset_config_set_steps(mset_config* cfg, int steps1, int steps2);
MSET_API mset_status mset_config_set_contour_spacing(mset_config* cfg, double spacing);
/* Borrowed strings, valid until the config is modified or freed. */
MSET_API const char* mset_config_output_dir(const mset_config* cfg);
MSET_API const char* mset_config_stem(const mset_config* cfg);
MSET_API const char* mset_config_netlist(const mset_config* cfg);
MSET_API const char* mset_config_hash(const mset_config* cfg);
MSET_API double mset_config_contour_spacing(const mset_config* cfg);
MSET_API int mset_config_wants_csv(const mset_config* cfg);
MSET_API int mset_config_wants_svg(const mset_config* cfg);

/* Checks the device spec, a mesh dry run, circuit names and referenced files.
 * *report (may be NULL) receives one line per violation. */
MSET_API mset_status mset_validate(const mset_config* cfg, char** report);

/* One operating point at the given gate voltages. */
MSET_API mset_status mset_solve(const mset_config* cfg, double vg1, double vg2, mset_op** out);
MSET_API double mset_op_vout(const mset_op* op);
MSET_API int mset_op_device_solves(const mset_op* op);
MSET_API mset_status mset_op_csv(const mset_op* op, char** header, char** row);
/* Node table x_um,y_um,psi_V,n_cm3,p_cm3. */
MSET_API mset_status mset_op_write_state(const mset_op* op, const char* path);
MSET_API void mset_op_free(mset_op* op);

MSET_API mset_status mset_statemap_run(const mset_config* cfg, mset_progress_fn progress, void* user,
                                       mset_statemap** out);
MSET_API mset_status mset_statemap_read_csv(const char* path, mset_statemap** out);
/* cfg (may be NULL) supplies the metadata header. */
MSET_API mset_status mset_statemap_write_csv(const mset_statemap* map, const mset_config* cfg, const char* path);
MSET_API mset_status mset_statemap_write_svg(const mset_statemap* map, const mset_config* cfg, double spacing,
                                             const char* path);
MSET_API size_t mset_statemap_rows(const mset_statemap* map);
MSET_API size_t mset_statemap_cols(const mset_statemap* map);
/* Cells carrying a label such as "S1", "OFF", "UNDEFINED" or "FAILED". */
MSET_API size_t mset_statemap_count(const mset_statemap* map, const char* label);
MSET_API size_t mset_statemap_isoline_levels(const mset_statemap* map, double spacing);
MSET_API size_t mset_statemap_failure_count(const mset_statemap* map);
/* Failure description, or NULL when index is out of range. */
MSET_API const char* mset_statemap_failure(const mset_statemap* map, size_t index);
MSET_API void mset_statemap_free(mset_statemap* map);

/* Truth table of a netlist (NULL: the config's logic.netlist) as CSV text. */
MSET_API mset_status mset_logic_truth_table(const mset_config* cfg, const char* netlist_path, char** csv,
                                            size_t* rows);

#ifdef __cplusplus
}
#endif

#endif
