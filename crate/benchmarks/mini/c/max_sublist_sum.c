/* Maximum contiguous sum. */

int max_sublist_sum(const int *xs, int n)
{
    int best = xs[0];
    int cur = 0;
    for (int i = 0; i < n; i++) {
        cur = xs[i] > cur + xs[i] ? xs[i] : cur + xs[i];
        best = best > xs[i] ? best : xs[i];
    }
    return best;
}
