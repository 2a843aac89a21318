/* Prime sieve. */

int sieve(int n, int *primes)
{
    char composite[1024] = {0};
    int count = 0;
    for (int i = 2; i <= n; i++) {
        if (!composite[i]) {
            primes[count++] = i;
            for (int j = i * i; j <= n; j += i) {
                composite[j] = 1;
            }
        }
    }
    return count;
}
