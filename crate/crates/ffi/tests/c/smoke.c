#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "churn.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(void) {
    ChurnDataset *ds = NULL;
    CHECK(churn_dataset_synthetic(400, 7, &ds) == CHURN_STATUS_OK);
    CHECK(churn_dataset_rows(ds) == 400);

    const char *names[] = {"k"};
    double values[] = {9};
    ChurnModel *model = NULL;
    CHECK(churn_model_fit(ds, "knn", names, values, 1, 1, &model) == CHURN_STATUS_OK);

    double *scores = malloc(400 * sizeof(double));
    CHECK(churn_model_predict(model, ds, scores, 400) == CHURN_STATUS_OK);
    for (int i = 0; i < 400; i++) CHECK(scores[i] >= 0.0 && scores[i] <= 1.0);

    ChurnMetrics m;
    CHECK(churn_model_evaluate(model, ds, &m) == CHURN_STATUS_OK);
    CHECK(m.accuracy > 0.5);

    CHECK(churn_metrics_from_counts(0, 0, 5, 5, &m) == CHURN_STATUS_OK);
    CHECK(isnan(m.precision));

    CHECK(churn_dataset_load("/nonexistent.csv", &ds) == CHURN_STATUS_IO);
    CHECK(ds == NULL);
    CHECK(churn_last_error_message() != NULL);

    printf("ok %s\n", churn_version());
    free(scores);
    churn_model_free(model);
    return 0;
}
