#include <stdio.h>

int sieve(int n, int *primes);

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
    int primes[64];
    check("sieve_ten", sieve(10, primes) == 4 && primes[3] == 7);
    check("sieve_nine", sieve(9, primes) == 4);
    return failures != 0;
}
