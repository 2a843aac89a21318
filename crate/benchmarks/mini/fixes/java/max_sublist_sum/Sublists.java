public class Sublists {
    public static int maxSublistSum(int[] xs) {
        int best = xs[0];
        int cur = 0;
        for (int x : xs) {
            cur = Math.max(x, cur + x);
            best = Math.max(best, cur);
        }
        return best;
    }
}
