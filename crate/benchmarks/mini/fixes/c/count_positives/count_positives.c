/* Counting helpers. */

int count_positives(const int *xs, int n)
{
    int count = 0;
    for (int i = 0; i < n; i++) {
        if (xs[i] > 0) {
            count++;
        }
    }
    return count;
}
