#include <math.h>
#include <stdio.h>

#include "robust_recourse.h"

int main(void) {
    const double w[3] = {1.0, -2.0, 0.5};
    const double x0[3] = {0.0, 1.0, 0.0};
    RrProblem *problem = NULL;
    if (rr_problem_new(w, -0.5, x0, 3, INFINITY, 0.2, 0.1, false, &problem) != RR_STATUS_OK) {
        fprintf(stderr, "%s\n", rr_last_error_message());
        return 1;
    }
    RrSolution *solution = NULL;
    if (rr_solve(problem, RR_ALGORITHM_ALG2, &solution) != RR_STATUS_OK) {
        fprintf(stderr, "%s\n", rr_last_error_message());
        rr_problem_free(problem);
        return 1;
    }
    double x[3];
    rr_solution_recourse(solution, x, 3);
    printf("price %.6f\nrecourse %.6f %.6f %.6f\n", rr_solution_price(solution), x[0], x[1], x[2]);
    rr_solution_free(solution);
    rr_problem_free(problem);
    return 0;
}
