/* C interface to the teleoperation/training stack. All functions return
 * FACTR_OK (0) on success or a nonzero status; factr_last_error() describes
 * the most recent failure on the calling thread. */

#ifndef FACTR_H
#define FACTR_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum factr_status {
  FACTR_OK = 0,
  FACTR_ERR_INVALID_ARGUMENT = 1,
  FACTR_ERR_IO = 2,
  FACTR_ERR_CONFIG = 3,
  FACTR_ERR_NUMERIC = 4,
  FACTR_ERR_FAULT = 5,
  FACTR_ERR_UNKNOWN = 6
} factr_status;

const char* factr_version(void);

/* Message for the last failing call on this thread; empty string if none. */
const char* factr_last_error(void);

/* Opaque configuration handle. */
typedef struct factr_config factr_config;

factr_config* factr_config_create(void);             /* schema defaults */
factr_config* factr_config_load(const char* path);   /* NULL on error */
factr_config* factr_config_clone(const factr_config* cfg);
void factr_config_destroy(factr_config* cfg);

int factr_config_set(factr_config* cfg, const char* key, const char* value);
/* Copies the value of key into buf (NUL terminated); returns FACTR_OK or an
 * error if the key is unknown or buf is too small. */
int factr_config_get(const factr_config* cfg, const char* key, char* buf, size_t buf_size);
unsigned long long factr_config_hash(const factr_config* cfg);

/* Demonstration collection: scripted expert, training-split textures only. */
int factr_gen_data(const factr_config* cfg, const char* out_dir);

/* Behavior-cloning training of one variant ("vision_only", "vision_force" or
 * "curriculum"); writes checkpoint.ckpt and trainlog.csv under out_dir. */
int factr_train(const factr_config* cfg, const char* dataset_dir, const char* out_dir,
                const char* variant);

/* Closed-loop evaluation of a checkpoint on "train" or "test" textures. */
int factr_eval(const factr_config* cfg, const char* checkpoint, const char* split,
               const char* out_dir);

/* Full (variant x seed) grid with summary.csv; includes the ablation grid
 * when the config enables it. */
int factr_experiment(const factr_config* cfg, const char* dataset_dir, const char* out_dir);

/* Bilateral teleoperation scenario suite, both feedback modes. */
int factr_teleop_sim(const factr_config* cfg, const char* out_dir);

/* Kernel-analysis verification CSVs. */
int factr_ntk_verify(const factr_config* cfg, const char* out_dir);

/* (n, sigma_n) rows for the configured scheduler. */
int factr_dump_schedule(const factr_config* cfg, const char* out_path);

/* Human-readable header dump of an episode file, checkpoint or manifest.
 * Returns a malloc'd string (caller frees with factr_string_free) or NULL. */
char* factr_inspect(const char* path);
void factr_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* FACTR_H */
