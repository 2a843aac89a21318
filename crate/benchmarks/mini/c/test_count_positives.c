#include <stdio.h>

int count_positives(const int *xs, int n);

static int failures;

static void check(const char *name, int ok)
{
    if (!ok) {
        printf("FAIL: %s\n", name);
        failures++;
    }
}

int main(void)
{
    int mixed[] = {-1, 0, 2, 3};
    check("count_mixed", count_positives(mixed, 4) == 2);
    return failures != 0;
}
