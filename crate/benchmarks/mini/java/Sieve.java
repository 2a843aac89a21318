import java.util.ArrayList;
import java.util.List;

public class Sieve {
    public static List<Integer> sieve(int n) {
        boolean[] composite = new boolean[n + 1];
        List<Integer> primes = new ArrayList<>();
        for (int i = 2; i <= n; i++) {
            if (!composite[i]) {
                primes.add(i);
                for (int j = i * i; j < n; j += i) {
                    composite[j] = true;
                }
            }
        }
        return primes;
    }
}
