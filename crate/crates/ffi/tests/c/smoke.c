#include <stdio.h>
#include <string.h>
#include "cohesia.h"

static const char *DOC =
    "{\"id\":\"c-smoke\",\"sections\":[{\"heading\":\"A\",\"text\":"
    "\"The parser reads the grammar. The grammar defines every token. "
    "The parser builds a tree from each token. The tree feeds the compiler. "
    "The compiler checks the tree. The compiler emits code.\"}]}";

int main(void) {
    CohesiaReport *report = NULL;
    if (cohesia_analyze_json(DOC, "{\"seed\":7}", &report) != COHESIA_STATUS_OK) {
        fprintf(stderr, "analyze: %s\n", cohesia_last_error());
        return 1;
    }
    CohesiaMetrics m;
    if (cohesia_report_metrics(report, &m) != COHESIA_STATUS_OK || m.section_count != 1) {
        return 2;
    }
    char *md = NULL;
    if (cohesia_report_render(report, COHESIA_FORMAT_MARKDOWN, &md) != COHESIA_STATUS_OK) {
        return 3;
    }
    int has_id = strstr(md, "c-smoke") != NULL;
    cohesia_string_free(md);
    cohesia_report_free(report);

    double table[4] = {101, 42, 548, 1133}, chi2 = 0, p = 1;
    if (cohesia_chi_square_2x2(table, &chi2, &p) != COHESIA_STATUS_OK) {
        return 4;
    }
    if (cohesia_analyze_json(NULL, NULL, &report) != COHESIA_STATUS_NULL_ARGUMENT
        || cohesia_last_error() == NULL) {
        return 5;
    }
    printf("version=%s md=%d chi2=%.4f p<0.001=%d\n", cohesia_version(), has_id, chi2, p < 1e-3);
    return has_id ? 0 : 6;
}
