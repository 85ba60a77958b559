#include <stdio.h>
int main() {
    long long f = 1;
    int n, i;
    scanf("%d", &n);
    for (i = 2; i <= n; i++) {
        f = f * i;
    }
    printf("%lld\n", f);
    return 0;
}
