#include <stdio.h>

void clamp_all(int *values, int n, int lo, int hi);

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
    int v[] = {-5, 3, 12};
    check("clamp_both_sides", (clamp_all(v, 3, 0, 10), v[0] == 0 && v[1] == 3 && v[2] == 10));
    return failures != 0;
}
